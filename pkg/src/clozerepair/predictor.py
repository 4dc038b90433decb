"""Masked-token predictors: the oracle interface the engine queries.

Three implementations share one duck-typed surface (predict / score_token):

* ReferencePredictor -- a deterministic interpolated bidirectional trigram
  (left and right trigram with add-one smoothing, equal weights), trained
  on a plain-text corpus. Mask sentinels and out-of-range positions count
  as unknown context. Fully offline and reproducible.
* RemotePredictor -- a thin JSON-over-HTTP client for a model server
  speaking the predict/score/info wire protocol.
* CachedPredictor -- wraps any predictor with a persistent content-keyed
  store so identical queries never hit the backend twice.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass

from .tokens import MASK_SENTINEL, EmptyCorpus, TokenizerConfig, tokenize

log = logging.getLogger(__name__)

_BOUNDARY = "\x02"  # context slot beyond either end of the sequence
_UNKNOWN = "\x01"  # context slot holding a mask sentinel


class EmptyVocabulary(RuntimeError):
    """The reference predictor was queried before it was trained."""


class BackendUnavailable(RuntimeError):
    """The remote predictor could not produce an answer."""


class StoreCorrupt(RuntimeError):
    """A cache store failed its checksum; its contents must not be trusted."""


@dataclass(frozen=True)
class PredictorQuery:
    tokens: tuple
    mask_index: int
    top_k: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not (0 <= self.mask_index < len(self.tokens)):
            raise ValueError("mask_index out of range")
        if self.tokens[self.mask_index].kind != MASK_SENTINEL:
            raise ValueError("mask_index must point at a mask sentinel")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")


@dataclass(frozen=True)
class TokenDistribution:
    candidates: tuple  # ((token, logprob), ...) sorted by logprob desc

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(tuple(c) for c in self.candidates))

    def tokens(self):
        return [token for token, _ in self.candidates]


def _context_slot(tokens, index):
    if index < 0 or index >= len(tokens):
        return _BOUNDARY
    token = tokens[index]
    if token.kind == MASK_SENTINEL:
        return _UNKNOWN
    return token.text


class ReferencePredictor:
    """Interpolated left/right trigram model over token texts."""

    def __init__(self, state=None):
        state = state or {}
        self.left_counts = dict(state.get("left_counts", {}))
        self.right_counts = dict(state.get("right_counts", {}))
        self.left_context_totals = dict(state.get("left_context_totals", {}))
        self.right_context_totals = dict(state.get("right_context_totals", {}))
        self.vocabulary = sorted(state.get("vocabulary", []))

    # -- training ----------------------------------------------------------

    @classmethod
    def train(cls, corpus, config=None):
        corpus = list(corpus)
        if not corpus:
            raise EmptyCorpus("cannot train the reference predictor on an empty corpus")
        config = config or TokenizerConfig()
        model = cls()
        vocab = set()
        for line in corpus:
            texts = [t.text for t in tokenize(line, config)]
            vocab.update(texts)
            for i, target in enumerate(texts):
                left = (
                    texts[i - 2] if i >= 2 else _BOUNDARY,
                    texts[i - 1] if i >= 1 else _BOUNDARY,
                )
                right = (
                    texts[i + 1] if i + 1 < len(texts) else _BOUNDARY,
                    texts[i + 2] if i + 2 < len(texts) else _BOUNDARY,
                )
                _bump(model.left_counts, left + (target,))
                _bump(model.left_context_totals, left)
                _bump(model.right_counts, right + (target,))
                _bump(model.right_context_totals, right)
        model.vocabulary = sorted(vocab)
        return model

    # -- serialization -----------------------------------------------------

    def to_state(self):
        return {
            "left_counts": {"\x1f".join(k): v for k, v in self.left_counts.items()},
            "right_counts": {"\x1f".join(k): v for k, v in self.right_counts.items()},
            "left_context_totals": {
                "\x1f".join(k): v for k, v in self.left_context_totals.items()},
            "right_context_totals": {
                "\x1f".join(k): v for k, v in self.right_context_totals.items()},
            "vocabulary": list(self.vocabulary),
        }

    @classmethod
    def from_state(cls, state):
        def unkey(table):
            return {tuple(k.split("\x1f")): v for k, v in table.items()}
        model = cls()
        model.left_counts = unkey(state["left_counts"])
        model.right_counts = unkey(state["right_counts"])
        model.left_context_totals = unkey(state["left_context_totals"])
        model.right_context_totals = unkey(state["right_context_totals"])
        model.vocabulary = sorted(state["vocabulary"])
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_state(), handle, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as handle:
            return cls.from_state(json.load(handle))

    # -- queries -----------------------------------------------------------

    def _logprob(self, tokens, mask_index, target):
        vocab_size = len(self.vocabulary)
        left = (_context_slot(tokens, mask_index - 2),
                _context_slot(tokens, mask_index - 1))
        right = (_context_slot(tokens, mask_index + 1),
                 _context_slot(tokens, mask_index + 2))
        left_p = (self.left_counts.get(left + (target,), 0) + 1) / \
            (self.left_context_totals.get(left, 0) + vocab_size)
        right_p = (self.right_counts.get(right + (target,), 0) + 1) / \
            (self.right_context_totals.get(right, 0) + vocab_size)
        return math.log(0.5 * left_p + 0.5 * right_p)

    def predict(self, query):
        if not self.vocabulary:
            raise EmptyVocabulary("reference predictor has no training state")
        scored = [
            (token, self._logprob(query.tokens, query.mask_index, token))
            for token in self.vocabulary
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return TokenDistribution(tuple(scored[:query.top_k]))

    def score_token(self, tokens, mask_index, target):
        if not self.vocabulary:
            raise EmptyVocabulary("reference predictor has no training state")
        if tokens[mask_index].kind != MASK_SENTINEL:
            raise ValueError("score_token requires a mask at mask_index")
        return self._logprob(tokens, mask_index, target)


def _bump(table, key):
    table[key] = table.get(key, 0) + 1


def train_reference(corpus, config=None):
    """Train the deterministic reference predictor on corpus lines."""
    return ReferencePredictor.train(corpus, config)


# --- remote client ---------------------------------------------------------


class RemotePredictor:
    """Client for the predict/score/info wire protocol over HTTP.

    Responses are returned verbatim; ordering and tie-breaks are the
    server's. Network and protocol failures surface as BackendUnavailable.
    """

    def __init__(self, endpoint, timeout=30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._info = None

    def _call(self, payload):
        body = json.dumps(payload).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                answer = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise BackendUnavailable(f"model server at {self.endpoint}: {exc}") from exc
        if isinstance(answer, dict) and "error" in answer:
            code = answer["error"].get("code", "unknown")
            raise BackendUnavailable(f"model server error: {code}")
        return answer

    def info(self):
        if self._info is None:
            answer = self._call({"kind": "info"})
            for key in ("model", "mask_sentinel", "max_tokens"):
                if key not in answer:
                    raise BackendUnavailable(f"info response missing {key!r}")
            self._info = answer
        return self._info

    def predict(self, query):
        answer = self._call({
            "kind": "predict",
            "tokens": [t.text for t in query.tokens],
            "mask_index": query.mask_index,
            "top_k": query.top_k,
        })
        try:
            candidates = tuple(
                (c["token"], float(c["logprob"])) for c in answer["candidates"])
        except (KeyError, TypeError) as exc:
            raise BackendUnavailable(f"malformed predict response: {exc}") from exc
        return TokenDistribution(candidates)

    def score_token(self, tokens, mask_index, target):
        answer = self._call({
            "kind": "score",
            "tokens": [t.text for t in tokens],
            "mask_index": mask_index,
            "target": target,
        })
        try:
            return float(answer["logprob"])
        except (KeyError, TypeError) as exc:
            raise BackendUnavailable(f"malformed score response: {exc}") from exc


# --- persistent cache ------------------------------------------------------


class CacheStore:
    """Append-only JSONL store with per-record checksums.

    A checksum mismatch or undecodable record marks the whole store corrupt:
    the file is discarded and rebuilt empty, and the event is recorded on
    ``corruption_detected`` (nothing from a corrupt file is trusted).
    """

    def __init__(self, path=None):
        self.path = path
        self.entries = {}
        self.corruption_detected = False
        self._lock = threading.Lock()
        if path is not None:
            try:
                self.entries = self._read_strict()
            except (StoreCorrupt, OSError) as exc:
                if isinstance(exc, StoreCorrupt):
                    log.warning("cache store %s corrupt, rebuilding: %s", path, exc)
                    self.corruption_detected = True
                    self._rewrite({})
                self.entries = {}

    def _read_strict(self):
        entries = {}
        with open(self.path, encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    key, payload, digest = record["key"], record["value"], record["sum"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise StoreCorrupt(f"line {line_number}: {exc}")
                if _payload_digest(payload) != digest:
                    raise StoreCorrupt(f"line {line_number}: checksum mismatch")
                entries[key] = payload
        return entries

    def _rewrite(self, entries):
        with open(self.path, "w", encoding="utf-8") as handle:
            for key, payload in entries.items():
                handle.write(_record_line(key, payload))

    def get(self, key):
        return self.entries.get(key)

    def put(self, key, payload):
        with self._lock:
            self.entries[key] = payload
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(_record_line(key, payload))


def _payload_digest(payload):
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _record_line(key, payload):
    return json.dumps(
        {"key": key, "value": payload, "sum": _payload_digest(payload)},
        sort_keys=True) + "\n"


class CachedPredictor:
    """Memoizing wrapper; results are bit-identical to the backend's."""

    def __init__(self, backend, store):
        self.backend = backend
        self.store = store

    @staticmethod
    def _key(tokens, mask_index, kind, param):
        blob = json.dumps(
            [[t.text for t in tokens], mask_index, kind, param],
            ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def predict(self, query):
        key = self._key(query.tokens, query.mask_index, "predict", query.top_k)
        hit = self.store.get(key)
        if hit is not None:
            return TokenDistribution(tuple((t, lp) for t, lp in hit))
        distribution = self.backend.predict(query)
        self.store.put(key, [[t, lp] for t, lp in distribution.candidates])
        return distribution

    def score_token(self, tokens, mask_index, target):
        key = self._key(tokens, mask_index, "score", target)
        hit = self.store.get(key)
        if hit is not None:
            return hit
        logprob = self.backend.score_token(tokens, mask_index, target)
        self.store.put(key, logprob)
        return logprob


def cached(predictor, store):
    """Wrap a predictor with a CacheStore (path-backed or in-memory)."""
    if not isinstance(store, CacheStore):
        store = CacheStore(store)
    return CachedPredictor(predictor, store)
