"""The persistent query cache: identical predictor queries never hit the
backend twice, results survive across runs, and corrupted stores are
detected by checksum and rebuilt rather than trusted."""

import tempfile
from pathlib import Path

from clozerepair import PredictorQuery, cached, train_reference
from clozerepair.predictor import CacheStore
from clozerepair.tokens import tokenize


class Counting:
    def __init__(self, backend):
        self.backend = backend
        self.calls = 0

    def predict(self, query):
        self.calls += 1
        return self.backend.predict(query)

    def score_token(self, tokens, mask_index, target):
        self.calls += 1
        return self.backend.score_token(tokens, mask_index, target)


backend = Counting(train_reference(["a b c", "a b d", "b c d"]))
tokens = tuple(tokenize("a b <mask>"))
query = PredictorQuery(tokens, 2, 3)

with tempfile.TemporaryDirectory() as scratch:
    store_path = Path(scratch) / "queries.jsonl"
    predictor = cached(backend, store_path)
    for _ in range(5):
        predictor.predict(query)
    print("five identical queries ->", backend.calls, "backend call(s)")

    reopened = cached(backend, store_path)
    reopened.predict(query)
    print("after reopening the store ->", backend.calls, "backend call(s) total")

    blob = store_path.read_text().replace('"sum"', '"sim"', 1)
    store_path.write_text(blob)
    store = CacheStore(store_path)
    print("tampered store detected:", store.corruption_detected,
          "| entries kept:", len(store.entries))
