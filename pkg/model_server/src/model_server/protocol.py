"""Wire protocol: request validation and response shapes.

Requests are JSON objects with a "kind" field:

    {"kind": "predict", "tokens": [...], "mask_index": int, "top_k": int}
        -> {"candidates": [{"token": str, "logprob": float}, ...]}
    {"kind": "score", "tokens": [...], "mask_index": int, "target": str}
        -> {"logprob": float}
    {"kind": "info"}
        -> {"model": str, "mask_sentinel": str, "max_tokens": int, ...}

Errors come back as {"error": {"code": str, "message": str}} with
machine-readable codes; the transport always delivers the envelope (HTTP
responses are 200 so line-stream and web clients see identical payloads).
"""

from __future__ import annotations

MALFORMED_REQUEST = "malformed_request"
INPUT_TOO_LONG = "input_too_long"
UNKNOWN_KIND = "unknown_kind"

KINDS = ("predict", "score", "info")


class ProtocolError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code
        self.message = message

    def to_response(self):
        return {"error": {"code": self.code, "message": self.message}}


def _require(condition, message, code=MALFORMED_REQUEST):
    if not condition:
        raise ProtocolError(code, message)


def validate_request(payload, mask_sentinel, max_tokens):
    """Return the validated payload or raise ProtocolError."""
    _require(isinstance(payload, dict), "request must be a JSON object")
    kind = payload.get("kind")
    _require(isinstance(kind, str), "request needs a string 'kind'")
    if kind not in KINDS:
        raise ProtocolError(UNKNOWN_KIND, f"unknown request kind {kind!r}")
    if kind == "info":
        return payload

    tokens = payload.get("tokens")
    _require(isinstance(tokens, list) and tokens, "'tokens' must be a non-empty list")
    _require(all(isinstance(t, str) for t in tokens), "'tokens' must hold strings")
    if len(tokens) > max_tokens:
        raise ProtocolError(
            INPUT_TOO_LONG, f"{len(tokens)} tokens exceed the limit of {max_tokens}")
    mask_index = payload.get("mask_index")
    _require(isinstance(mask_index, int) and not isinstance(mask_index, bool),
             "'mask_index' must be an integer")
    _require(0 <= mask_index < len(tokens), "'mask_index' out of range")
    _require(tokens[mask_index] == mask_sentinel,
             f"tokens[mask_index] must be the mask sentinel {mask_sentinel!r}")

    if kind == "predict":
        top_k = payload.get("top_k")
        _require(isinstance(top_k, int) and not isinstance(top_k, bool) and top_k >= 1,
                 "'top_k' must be a positive integer")
    else:
        _require(isinstance(payload.get("target"), str), "'target' must be a string")
    return payload


def predict_response(candidates):
    return {"candidates": [
        {"token": token, "logprob": logprob} for token, logprob in candidates]}


def score_response(logprob):
    return {"logprob": logprob}


# --- response-side validators (used by the conformance suite) ---------------


def check_predict_response(payload, top_k):
    assert isinstance(payload, dict) and set(payload) == {"candidates"}
    candidates = payload["candidates"]
    assert isinstance(candidates, list) and len(candidates) <= top_k
    logprobs = []
    for entry in candidates:
        assert set(entry) == {"token", "logprob"}
        assert isinstance(entry["token"], str) and entry["token"]
        assert isinstance(entry["logprob"], float) and entry["logprob"] <= 0.0
        logprobs.append(entry["logprob"])
    assert logprobs == sorted(logprobs, reverse=True)


def check_score_response(payload):
    assert isinstance(payload, dict) and set(payload) == {"logprob"}
    assert isinstance(payload["logprob"], float) and payload["logprob"] <= 0.0


def check_info_response(payload):
    assert isinstance(payload, dict)
    assert {"model", "mask_sentinel", "max_tokens"} <= set(payload)
    assert isinstance(payload["model"], str)
    assert isinstance(payload["mask_sentinel"], str) and payload["mask_sentinel"]
    assert isinstance(payload["max_tokens"], int) and payload["max_tokens"] >= 16


def check_error_response(payload, code=None):
    assert isinstance(payload, dict) and set(payload) == {"error"}
    error = payload["error"]
    assert {"code", "message"} <= set(error)
    assert isinstance(error["code"], str) and isinstance(error["message"], str)
    if code is not None:
        assert error["code"] == code
