import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest


@pytest.fixture
def stub_server():
    """Minimal wire-protocol server for exercising the remote client."""
    state = {"requests": [], "fail_with": None,
             "info": {"model": "stub", "mask_sentinel": "<mask>", "max_tokens": 512}}

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
            state["requests"].append(payload)
            if state["fail_with"]:
                answer = {"error": {"code": state["fail_with"], "message": "stubbed"}}
            elif payload["kind"] == "info":
                answer = state["info"]
            elif payload["kind"] == "predict":
                answer = {"candidates": [
                    {"token": "b", "logprob": -0.25},
                    {"token": "c", "logprob": -1.5},
                ][:payload["top_k"]]}
            elif payload["kind"] == "score":
                answer = {"logprob": -0.25 if payload["target"] == "b" else -1.5}
            else:
                answer = {"error": {"code": "unknown_kind", "message": payload["kind"]}}
            blob = json.dumps(answer).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}/", state
    finally:
        server.shutdown()
        thread.join(timeout=5)
