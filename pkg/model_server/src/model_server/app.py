"""Service wiring: one handler shared by the HTTP route and the stdio loop.

Every response, including protocol errors, is delivered as a JSON body on
HTTP 200 so web and line-stream clients decode identical envelopes.
"""

import json
import sys
import threading

from .protocol import (
    MALFORMED_REQUEST,
    ProtocolError,
    predict_response,
    score_response,
    validate_request,
)


class Service:
    def __init__(self, backend):
        self.backend = backend
        # inference state may not be shared mid-request by some backends
        self._lock = threading.Lock()

    def info(self):
        payload = {
            "model": self.backend.name,
            "mask_sentinel": self.backend.mask_sentinel,
            "max_tokens": self.backend.max_tokens,
        }
        payload.update(self.backend.info_extras())
        return payload

    def handle(self, payload):
        try:
            request = validate_request(
                payload, self.backend.mask_sentinel, self.backend.max_tokens)
        except ProtocolError as exc:
            return exc.to_response()
        kind = request["kind"]
        if kind == "info":
            return self.info()
        with self._lock:
            if kind == "predict":
                candidates = self.backend.predict(
                    request["tokens"], request["mask_index"], request["top_k"])
                return predict_response(candidates)
            logprob = self.backend.score(
                request["tokens"], request["mask_index"], request["target"])
            return score_response(logprob)

    def handle_raw(self, raw):
        try:
            payload = json.loads(raw)
        except ValueError as exc:
            return ProtocolError(MALFORMED_REQUEST, f"bad JSON: {exc}").to_response()
        return self.handle(payload)


def create_app(backend):
    """FastAPI application answering the wire protocol on POST /."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    service = Service(backend)
    app = FastAPI(title="model-server", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.post("/")
    async def wire(request: Request):
        raw = await request.body()
        return JSONResponse(service.handle_raw(raw))

    @app.get("/")
    async def info():
        return JSONResponse(service.info())

    return app


def serve_stdio(backend, stdin=None, stdout=None):
    """Line-delimited requests on stdin, one JSON response per line."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    service = Service(backend)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(json.dumps(service.handle_raw(line)) + "\n")
        stdout.flush()
