import json
import math
import random
import threading

import pytest

from clozerepair.predictor import (
    BackendUnavailable,
    CachedPredictor,
    CacheStore,
    EmptyVocabulary,
    PredictorQuery,
    ReferencePredictor,
    RemotePredictor,
    TokenDistribution,
    cached,
    train_reference,
)
from clozerepair.tokens import EmptyCorpus, TokenizerConfig, tokenize


def query_for(text, top_k=3):
    tokens = tokenize(text)
    mask_index = next(i for i, t in enumerate(tokens) if t.kind == "mask-sentinel")
    return PredictorQuery(tokens=tuple(tokens), mask_index=mask_index, top_k=top_k)


def test_query_invariants():
    with pytest.raises(ValueError):
        PredictorQuery(tuple(tokenize("a b")), 1, 3)  # not a mask
    with pytest.raises(ValueError):
        query_for("a <mask>", top_k=0)


def test_hand_computed_trigram_example():
    model = train_reference(["a b c", "a b d"])
    result = model.predict(query_for("a b <mask>", top_k=2))
    tokens = result.tokens()
    assert tokens == ["c", "d"]  # equal scores, lexicographic tie-break
    (t1, lp1), (t2, lp2) = result.candidates
    assert lp1 == lp2
    # left context (a, b): counts 1 of 2; right context boundary: 1 of 2;
    # add-one smoothing with |V| = 4 gives (1+1)/(2+4) per side.
    assert lp1 == pytest.approx(math.log(0.5 * (2 / 6) + 0.5 * (2 / 6)))


def test_top_k_truncation():
    model = train_reference(["a b c"])
    assert len(model.predict(query_for("a <mask>", top_k=1)).candidates) == 1


def test_untrained_reference_raises():
    with pytest.raises(EmptyVocabulary):
        ReferencePredictor().predict(query_for("a <mask>"))
    with pytest.raises(EmptyVocabulary):
        ReferencePredictor().score_token(tokenize("<mask>"), 0, "a")


def test_train_vocabulary():
    model = train_reference(["x y"])
    assert model.vocabulary == ["x", "y"]


def test_training_is_line_order_insensitive():
    first = train_reference(["a b", "c d"])
    second = train_reference(["c d", "a b"])
    assert first.to_state() == second.to_state()


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        train_reference([])


def test_score_matches_predict():
    model = train_reference(["if (a < b) {", "if (a > b) {", "while (a < n) {"])
    query = query_for("if (a <mask> b) {", top_k=len(model.vocabulary))
    distribution = model.predict(query)
    for token, logprob in distribution.candidates:
        scored = model.score_token(query.tokens, query.mask_index, token)
        assert scored == logprob


def test_score_of_out_of_vocabulary_target_is_finite():
    model = train_reference(["a b c"])
    query = query_for("a <mask> c")
    value = model.score_token(query.tokens, query.mask_index, "zebra")
    assert math.isfinite(value) and value < 0


def test_exhaustive_distribution_sums_to_one():
    model = train_reference(["a b c d", "b c a d", "d a b c"])
    for text in ["<mask> b", "a <mask> c", "a b c <mask>", "<mask>"]:
        query = query_for(text, top_k=len(model.vocabulary))
        total = sum(math.exp(lp) for _, lp in model.predict(query).candidates)
        assert total <= 1 + 1e-9
        assert total == pytest.approx(1.0, abs=1e-9)


def test_masks_in_context_are_unknowns():
    model = train_reference(["a b c", "x b y"])
    # prediction with a masked neighbor differs from concrete neighbor
    with_mask = model.predict(query_for("<mask> <mask> c", top_k=4))
    concrete = model.predict(query_for("a <mask> c", top_k=4))
    assert with_mask.candidates != concrete.candidates


def test_state_round_trip(tmp_path):
    model = train_reference(["total = total + 1;", "if (total < max) {"])
    path = tmp_path / "predictor.json"
    model.save(path)
    loaded = ReferencePredictor.load(path)
    query = query_for("total = total + <mask>;", top_k=4)
    assert loaded.predict(query) == model.predict(query)


# --- cache ------------------------------------------------------------------


class CountingPredictor:
    def __init__(self, backend):
        self.backend = backend
        self.predict_calls = 0
        self.score_calls = 0

    def predict(self, query):
        self.predict_calls += 1
        return self.backend.predict(query)

    def score_token(self, tokens, mask_index, target):
        self.score_calls += 1
        return self.backend.score_token(tokens, mask_index, target)


def test_cache_deduplicates_backend_calls(tmp_path):
    counting = CountingPredictor(train_reference(["a b c"]))
    predictor = cached(counting, tmp_path / "cache.jsonl")
    query = query_for("a <mask> c")
    first = predictor.predict(query)
    second = predictor.predict(query)
    assert counting.predict_calls == 1
    assert first == second


def test_cache_distinguishes_top_k(tmp_path):
    counting = CountingPredictor(train_reference(["a b c"]))
    predictor = cached(counting, tmp_path / "cache.jsonl")
    predictor.predict(query_for("a <mask> c", top_k=1))
    predictor.predict(query_for("a <mask> c", top_k=2))
    assert counting.predict_calls == 2


def test_cache_is_persistent(tmp_path):
    path = tmp_path / "cache.jsonl"
    backend = train_reference(["a b c"])
    query = query_for("a <mask> c")
    counting = CountingPredictor(backend)
    cached(counting, path).predict(query)
    reopened = CountingPredictor(backend)
    result = cached(reopened, path).predict(query)
    assert reopened.predict_calls == 0
    assert result == backend.predict(query)


def test_cache_transparency_over_query_sequences(tmp_path):
    backend = train_reference(["if (a < b) {", "while (x < y) {"])
    predictor = cached(backend, tmp_path / "cache.jsonl")
    rng = random.Random(2)
    texts = ["if (<mask> < b) {", "while (x <mask> y) {", "if (a < <mask>) {"]
    for _ in range(30):
        text = rng.choice(texts)
        query = query_for(text, top_k=rng.randrange(1, 5))
        assert predictor.predict(query) == backend.predict(query)
        target = rng.choice(backend.vocabulary)
        assert predictor.score_token(query.tokens, query.mask_index, target) == \
            backend.score_token(query.tokens, query.mask_index, target)


def test_corrupt_store_is_rebuilt(tmp_path):
    path = tmp_path / "cache.jsonl"
    backend = train_reference(["a b c"])
    cached(backend, path).predict(query_for("a <mask> c"))
    blob = path.read_text().replace('"value"', '"vslue"', 1)
    path.write_text(blob)
    store = CacheStore(path)
    assert store.corruption_detected
    assert store.entries == {}
    # the rebuilt store works and repopulates
    predictor = CachedPredictor(backend, store)
    result = predictor.predict(query_for("a <mask> c"))
    assert result == backend.predict(query_for("a <mask> c"))
    assert CacheStore(path).entries  # repopulated cleanly


def test_checksum_flip_detected(tmp_path):
    path = tmp_path / "cache.jsonl"
    backend = train_reference(["a b c"])
    cached(backend, path).predict(query_for("a <mask> c"))
    record = json.loads(path.read_text())
    record["value"] = [["zzz", -0.1]]
    path.write_text(json.dumps(record) + "\n")
    assert CacheStore(path).corruption_detected


def test_cache_thread_safety(tmp_path):
    backend = train_reference(["a b c d e"])
    predictor = cached(backend, tmp_path / "cache.jsonl")
    queries = [query_for(f"a <mask> {t}") for t in "bcde"]
    errors = []

    def hammer():
        try:
            for _ in range(50):
                for query in queries:
                    predictor.predict(query)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=hammer) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors


# --- remote ----------------------------------------------------------------


def test_remote_backend_down():
    predictor = RemotePredictor("http://127.0.0.1:9", timeout=0.5)
    with pytest.raises(BackendUnavailable):
        predictor.predict(query_for("a <mask> c"))


def test_remote_against_stub_server(stub_server):
    endpoint, state = stub_server
    predictor = RemotePredictor(endpoint)
    info = predictor.info()
    assert info["mask_sentinel"] == "<mask>"
    query = query_for("a <mask> c", top_k=2)
    result = predictor.predict(query)
    assert result.tokens() == ["b", "c"]
    assert predictor.score_token(query.tokens, query.mask_index, "b") == -0.25
    assert state["requests"][0]["kind"] == "info"


def test_remote_error_response(stub_server):
    endpoint, state = stub_server
    state["fail_with"] = "input_too_long"
    predictor = RemotePredictor(endpoint)
    with pytest.raises(BackendUnavailable, match="input_too_long"):
        predictor.predict(query_for("a <mask> c"))
