import itertools
import random

import pytest

from clozerepair.context import RepairTask, build_input
from clozerepair.engine import (
    CandidatePatch,
    aggregate,
    beam_fill,
    line_well_formed,
    rerank,
)
from clozerepair.masks import COMPLETE_REPLACE, MaskLine, generate_mask_lines
from clozerepair.predictor import PredictorQuery, TokenDistribution, train_reference
from clozerepair.tokens import MASK_SENTINEL, TokenizerConfig, tokenize

CONFIG = TokenizerConfig()


def input_for(buggy, mask_line, context=("int a = 0;", "int b = 1;")):
    lines = [context[0], buggy, context[1]]
    task = RepairTask(source_lines=lines, buggy_line_index=1)
    return build_input(task, mask_line, CONFIG)


def complete_line(mask_count):
    return MaskLine(COMPLETE_REPLACE, (), (), mask_count)


class ScriptedPredictor:
    """Plays back fixed distributions keyed on the fill progress."""

    def __init__(self, mask_positions, steps, scores=None):
        self.mask_positions = tuple(mask_positions)
        self.steps = steps
        self.scores = scores or {}

    def _fill_state(self, tokens, skip=None):
        return tuple(
            tokens[p].text for p in self.mask_positions
            if p != skip and tokens[p].kind != MASK_SENTINEL)

    def predict(self, query):
        filled = self._fill_state(query.tokens)
        table = self.steps[(len(filled), filled)]
        return TokenDistribution(tuple(table[:query.top_k]))

    def score_token(self, tokens, mask_index, target):
        fills = self._fill_state(tokens, skip=mask_index)
        position = self.mask_positions.index(mask_index)
        return self.scores[(position, target, fills)]


# --- beam_fill --------------------------------------------------------------


def test_single_mask_returns_top_n_in_order():
    model = train_reference(["a b c", "a b d", "a b d"])
    built = input_for("a b x", complete_line(1), context=("a b c;", "a b d;"))
    # single-mask line: patches are exactly the predictor's ranked tokens
    patches = beam_fill(built, beam_width=3, predictor=model, config=CONFIG)
    expected = model.predict(PredictorQuery(
        tokens=built.tokens, mask_index=built.mask_positions[0], top_k=3))
    assert [p.rendered_line for p in patches] == expected.tokens()
    assert [p.temp_joint_score for p in patches] == [lp for _, lp in expected.candidates]


def _brute_force_fills(built, vocabulary, predictor):
    """Independent enumeration oracle: every assignment, scored by the same
    sequential left-to-right masking discipline, sorted like the beam."""
    positions = built.mask_positions
    results = []
    for assignment in itertools.product(vocabulary, repeat=len(positions)):
        total = 0.0
        for i, position in enumerate(positions):
            probe = list(built.tokens)
            for j in range(i):
                probe[positions[j]] = tokenize(assignment[j], CONFIG)[0]
            total += predictor.score_token(tuple(probe), position, assignment[i])
        results.append((assignment, total / len(positions)))
    results.sort(key=lambda item: (-item[1], item[0]))
    return results


def test_beam_matches_brute_force_enumeration():
    corpus = ["u v w", "v w u", "w u v", "u w v"]
    model = train_reference(corpus)
    vocabulary = model.vocabulary
    assert len(vocabulary) <= 5
    built = input_for("u v w", complete_line(3), context=("u v w;", "w v u;"))
    width = len(vocabulary) ** 3
    patches = beam_fill(built, beam_width=width, predictor=model, config=CONFIG)
    oracle = _brute_force_fills(built, vocabulary, model)
    assert len(patches) == len(oracle)
    for patch, (assignment, score) in zip(patches, oracle):
        assert patch.filled_tokens == assignment
        assert patch.temp_joint_score == score


def test_well_formedness_filter():
    assert line_well_formed(tokenize("if (a < b) {"))
    assert line_well_formed(tokenize("} else {"))
    assert line_well_formed(tokenize("call(arg,"))
    assert not line_well_formed(tokenize("f(a))"))
    assert not line_well_formed(tokenize("x = (a)) + (b"))
    assert line_well_formed(tokenize('s = ")" ;'))  # literal bracket ignored


def test_filter_drops_unbalanced_fills():
    prefix = tuple(tokenize("x = f ("))
    mask_line = MaskLine(COMPLETE_REPLACE, prefix, (), 2)
    built = input_for("x = f(a);", mask_line)
    scripted = ScriptedPredictor(
        built.mask_positions,
        {
            (0, ()): [(")", -0.1), ("a", -0.2)],
            (1, (")",)): [(")", -0.1)],  # renders x = f()) -> over-closed
            (1, ("a",)): [(")", -0.1)],  # renders x = f(a) -> fine
        },
    )
    kept = beam_fill(built, 2, scripted, CONFIG)
    assert [p.rendered_line for p in kept] == ["x = f(a)"]
    unfiltered = beam_fill(built, 2, scripted, CONFIG, well_formed_filter=False)
    assert [p.rendered_line for p in unfiltered] == ["x = f())", "x = f(a)"]


def test_beam_prefix_availability():
    """Every query must have concrete tokens at all mask slots left of the
    queried one (the predictor always sees one-sided immediate context)."""
    model = train_reference(["p q r s", "q r s p"])
    built = input_for("p q r", complete_line(3), context=("p q;", "r s;"))
    seen = []

    class Recorder:
        def predict(self, query):
            seen.append((query.mask_index, tuple(t.kind for t in query.tokens)))
            return model.predict(query)

    beam_fill(built, 3, Recorder(), CONFIG)
    positions = built.mask_positions
    for mask_index, kinds in seen:
        step = positions.index(mask_index)
        for j in range(step):
            assert kinds[positions[j]] != MASK_SENTINEL
        for j in range(step, len(positions)):
            assert kinds[positions[j]] == MASK_SENTINEL


def test_beam_propagates_empty_when_everything_filtered():
    prefix = tuple(tokenize("f ( )"))
    built = input_for("f();", MaskLine(COMPLETE_REPLACE, prefix, (), 1))
    scripted = ScriptedPredictor(built.mask_positions, {(0, ()): [(")", -0.1)]})
    assert beam_fill(built, 1, scripted, CONFIG) == []


# --- rerank -----------------------------------------------------------------


def _three_token_patch():
    built = input_for("a b c", complete_line(3))
    positions = built.mask_positions
    steps = {
        (0, ()): [("a", -0.5)],
        (1, ("a",)): [("b", -0.5)],
        (2, ("a", "b")): [("c", -0.5)],
    }
    scores = {
        (0, "a", ("b", "c")): -0.2,
        (1, "b", ("a", "c")): -0.4,
        (2, "c", ("a", "b")): -0.6,
    }
    predictor = ScriptedPredictor(positions, steps, scores)
    patches = beam_fill(built, 1, predictor, CONFIG)
    return patches, predictor


def test_rerank_mean_of_leave_one_out():
    patches, predictor = _three_token_patch()
    ranked = rerank(patches, predictor, CONFIG)
    assert ranked[0].joint_score == pytest.approx(-0.4)
    assert ranked[0].rank == 1


def test_rerank_single_token_equals_temp_score():
    model = train_reference(["m n o", "n o m"])
    built = input_for("m n o", complete_line(1), context=("m n;", "o m;"))
    patches = beam_fill(built, 2, model, CONFIG)
    ranked = rerank(patches, model, CONFIG)
    for patch in ranked:
        assert patch.joint_score == patch.temp_joint_score


def test_rerank_is_permutation_and_recomputable():
    model = train_reference(
        ["total = total + 1;", "count = count + step;", "total = count + 1;"])
    built = input_for("total = count + 1;", complete_line(3),
                      context=("count = 0;", "return total;"))
    patches = beam_fill(built, 4, model, CONFIG)
    ranked = rerank(patches, model, CONFIG)
    assert sorted(p.rendered_line for p in ranked) == \
        sorted(p.rendered_line for p in patches)
    assert [p.rank for p in ranked] == list(range(1, len(ranked) + 1))
    for patch in ranked:
        positions = patch.source.mask_positions
        full = list(patch.source.tokens)
        for i, text in enumerate(patch.filled_tokens):
            full[positions[i]] = tokenize(text, CONFIG)[0]
        total = 0.0
        for i, position in enumerate(positions):
            probe = list(full)
            probe[position] = tokenize("<mask>", CONFIG)[0]
            total += model.score_token(tuple(probe), position, patch.filled_tokens[i])
        assert abs(patch.joint_score - total / len(positions)) <= 1e-12


def test_joint_score_ignores_far_context():
    """Padding the file far from the mask line must not move joint scores."""
    corpus = ["alpha beta gamma delta", "beta gamma delta alpha"]
    model = train_reference(corpus)
    line = tokenize("alpha beta gamma delta epsilon zeta")
    mask_line = MaskLine(COMPLETE_REPLACE, tuple(line[:2]), tuple(line[-2:]), 2)
    near = input_for("alpha beta gamma delta epsilon zeta", mask_line,
                     context=("alpha beta;", "gamma delta;"))
    far = input_for("alpha beta gamma delta epsilon zeta", mask_line,
                    context=("totally different padding here;", "and more padding;"))
    ranked_near = rerank(beam_fill(near, 3, model, CONFIG), model, CONFIG)
    ranked_far = rerank(beam_fill(far, 3, model, CONFIG), model, CONFIG)
    near_scores = {p.rendered_line: p.joint_score for p in ranked_near}
    far_scores = {p.rendered_line: p.joint_score for p in ranked_far}
    assert near_scores == far_scores


# --- aggregate ---------------------------------------------------------------


def patch(rendered, joint, temp=-1.0, inserted="replace", strategy="complete-replace"):
    return CandidatePatch(
        rendered_line=rendered, inserted=inserted, strategy=strategy,
        temp_joint_score=temp, joint_score=joint)


def test_aggregate_dedupes_keeping_best_joint():
    merged = aggregate([[patch("x = 1;", -0.9)], [patch("x = 1;", -0.2)]], 10)
    assert len(merged) == 1
    assert merged[0].joint_score == -0.2


def test_aggregate_keeps_insertion_variants_apart():
    merged = aggregate(
        [[patch("x = 1;", -0.5)], [patch("x = 1;", -0.4, inserted="before")]], 10)
    assert len(merged) == 2


def test_aggregate_sorts_and_truncates():
    lists = [[patch("a;", -0.7), patch("b;", -0.1)], [patch("c;", -0.4)]]
    merged = aggregate(lists, 2)
    assert [p.rendered_line for p in merged] == ["b;", "c;"]
    assert [p.rank for p in merged] == [1, 2]


def test_aggregate_all_retained_when_under_cap():
    lists = [[patch("a;", -0.7)], [patch("b;", -0.1)]]
    assert len(aggregate(lists, 10)) == 2


def test_aggregate_requires_reranked_input():
    unranked = CandidatePatch(
        rendered_line="x;", inserted="replace", strategy="complete-replace",
        temp_joint_score=-1.0)
    with pytest.raises(ValueError):
        aggregate([[unranked]], 5)
