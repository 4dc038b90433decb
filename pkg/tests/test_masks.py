import random

import pytest

from clozerepair import masks
from clozerepair.masks import (
    COMPLETE_INSERT_AFTER,
    COMPLETE_INSERT_BEFORE,
    COMPLETE_REPLACE,
    PARTIAL_AFTER,
    PARTIAL_BEFORE,
    TEMPLATE_BOOL_APPEND,
    TEMPLATE_BOOL_REPLACE,
    TEMPLATE_METHOD_REPLACE,
    TEMPLATE_OPERATOR_REPLACE,
    TEMPLATE_PARAM_APPEND,
    TEMPLATE_PARAM_REPLACE_ALL,
    TEMPLATE_PARAM_REPLACE_ONE,
    MaskLine,
    analyze_line,
    expand_strategies,
    generate_mask_lines,
)
from clozerepair.tokens import tokenize


def by_strategy(lines, strategy):
    return [line for line in lines if line.strategy == strategy]


def spans_text(tokens, span):
    return " ".join(t.text for t in tokens[span[0]:span[1]])


# --- analyze_line ----------------------------------------------------------


def test_analyze_if_condition_and_operators():
    tokens = tokenize("if (a < b || c) {")
    syntax = analyze_line(tokens)
    assert syntax.boolean_condition is not None
    assert spans_text(tokens, syntax.boolean_condition) == "a < b || c"
    assert [site.text for site in syntax.operators] == ["<", "||"]


def test_analyze_nested_calls():
    tokens = tokenize("x = f(a, g(b));")
    syntax = analyze_line(tokens)
    calls = {spans_text(tokens, c.name_span): c for c in syntax.method_calls}
    assert set(calls) == {"f", "g"}
    f_args = [spans_text(tokens, s) for s in calls["f"].argument_spans]
    assert f_args == ["a", "g(b)"] or f_args == ["a", "g ( b )"]
    g_args = [spans_text(tokens, s) for s in calls["g"].argument_spans]
    assert g_args == ["b"]


def test_analyze_unparseable_line_is_empty():
    syntax = analyze_line(tokenize("}"))
    assert syntax.method_calls == ()
    assert syntax.boolean_condition is None
    assert syntax.operators == ()


def test_analyze_keywords_are_not_callees():
    syntax = analyze_line(tokenize("if (ready) {"))
    assert syntax.method_calls == ()


def test_analyze_return_boolean():
    tokens = tokenize("return found && !empty;")
    syntax = analyze_line(tokens)
    assert spans_text(tokens, syntax.boolean_condition) == "found && ! empty"


def test_analyze_return_non_boolean():
    assert analyze_line(tokenize("return total;")).boolean_condition is None


def test_analyze_for_middle_clause():
    tokens = tokenize("for (int i = 0; i < n; i++) {")
    syntax = analyze_line(tokens)
    assert spans_text(tokens, syntax.boolean_condition) == "i < n"


# --- generate_mask_lines: counts -------------------------------------------


def _complete_count(line_len):
    return 3 * (line_len + 10)


def _partial_side_count(line_len):
    return sum(line_len + 10 - keep for keep in range(1, line_len))


def _brute_force_partial_before(tokens):
    """Independent enumeration of (kept suffix, mask count) pairs."""
    expected = set()
    line_len = len(tokens)
    for keep in range(1, line_len):
        suffix = tuple(t.text for t in tokens[line_len - keep:])
        for count in range(1, line_len + 10 - keep + 1):
            expected.add(("<mask>",) * count + suffix)
    return expected


def _random_tokens(rng, line_len):
    alphabet = ["x", "y", "count", "0", "1", ";", "+", "<", "(", ")", "=", "idx"]
    return tokenize(" ".join(rng.choice(alphabet) for _ in range(line_len)))


def test_count_laws_for_small_lines():
    rng = random.Random(3)
    for line_len in range(1, 9):
        for _ in range(5):
            tokens = _random_tokens(rng, line_len)
            lines = generate_mask_lines(tokens)
            complete = [l for l in lines if l.strategy.startswith("complete")]
            assert len(complete) == _complete_count(line_len)
            before = by_strategy(lines, PARTIAL_BEFORE)
            after = by_strategy(lines, PARTIAL_AFTER)
            assert len(before) == _partial_side_count(line_len)
            assert len(after) == _partial_side_count(line_len)
            rendered = {l.rendered_texts() for l in before}
            assert rendered == _brute_force_partial_before(tokens)


def test_sweep_bound_keep_five_of_twelve():
    # keeping 5 of 12 tokens leaves room to grow the line to 22, so the
    # mask count sweeps 1..17
    tokens = _random_tokens(random.Random(0), 12)
    lines = by_strategy(generate_mask_lines(tokens), PARTIAL_AFTER)
    keep_five = [l for l in lines if len(l.kept_prefix) == 5]
    counts = sorted(l.mask_count for l in keep_five)
    assert counts == list(range(1, 18))


def test_single_token_line():
    lines = generate_mask_lines(tokenize("break"))
    assert by_strategy(lines, PARTIAL_BEFORE) == []
    assert by_strategy(lines, PARTIAL_AFTER) == []
    replace = by_strategy(lines, COMPLETE_REPLACE)
    assert sorted(l.mask_count for l in replace) == list(range(1, 12))


def test_operator_replace_single_site():
    lines = by_strategy(generate_mask_lines(tokenize("if (a < b) {")),
                        TEMPLATE_OPERATOR_REPLACE)
    assert len(lines) == 1
    line = lines[0]
    assert line.mask_count == 1
    assert line.rendered_texts() == ("if", "(", "a", "<mask>", "b", ")", "{")


# --- generate_mask_lines: structure ----------------------------------------


def test_rendered_length_bound():
    rng = random.Random(5)
    for _ in range(20):
        tokens = _random_tokens(rng, rng.randrange(1, 9))
        for line in generate_mask_lines(tokens):
            assert line.mask_count >= 1
            assert line.rendered_length <= len(tokens) + 10 or \
                line.strategy == TEMPLATE_OPERATOR_REPLACE
            if line.strategy == TEMPLATE_OPERATOR_REPLACE:
                assert line.mask_count == 1


def test_partial_keeps_are_real_prefixes_and_suffixes():
    tokens = tokenize("total = total + step ;")
    source = tuple(t.text for t in tokens)
    for line in generate_mask_lines(tokens):
        prefix = tuple(t.text for t in line.kept_prefix)
        suffix = tuple(t.text for t in line.kept_suffix)
        if line.strategy == PARTIAL_AFTER:
            assert source[:len(prefix)] == prefix and not suffix
        if line.strategy == PARTIAL_BEFORE:
            assert source[len(source) - len(suffix):] == suffix and not prefix


def test_no_duplicate_rendered_lines():
    tokens = tokenize("if (f(a, b) < g(c)) {")
    lines = generate_mask_lines(tokens)
    keys = [(l.rendered_texts(), l.insertion) for l in lines]
    assert len(keys) == len(set(keys))


def test_deterministic_order():
    tokens = tokenize("while (i < n) { i = i + 1; }")
    first = generate_mask_lines(tokens)
    second = generate_mask_lines(tokens)
    assert first == second


def test_insertion_modes():
    lines = generate_mask_lines(tokenize("return x ;"))
    assert all(l.insertion == "before" for l in by_strategy(lines, COMPLETE_INSERT_BEFORE))
    assert all(l.insertion == "after" for l in by_strategy(lines, COMPLETE_INSERT_AFTER))
    others = [l for l in lines if not l.strategy.startswith("complete-insert")]
    assert all(l.insertion == "replace" for l in others)


def test_template_param_masks():
    tokens = tokenize("update(total, step);")
    lines = generate_mask_lines(tokens)
    all_args = by_strategy(lines, TEMPLATE_PARAM_REPLACE_ALL)
    assert all_args and all_args[0].rendered_texts()[:2] == ("update", "(")
    one = by_strategy(lines, TEMPLATE_PARAM_REPLACE_ONE)
    first_arg = [l for l in one if l.mask_count == 1 and
                 l.rendered_texts() == ("update", "(", "<mask>", ",", "step", ")", ";")]
    assert first_arg
    append = by_strategy(lines, TEMPLATE_PARAM_APPEND)
    assert append[0].rendered_texts() == (
        "update", "(", "total", ",", "step", ",", "<mask>", ")", ";")


def test_template_param_append_empty_call_has_no_comma():
    lines = by_strategy(generate_mask_lines(tokenize("refresh();")),
                        TEMPLATE_PARAM_APPEND)
    assert lines[0].rendered_texts() == ("refresh", "(", "<mask>", ")", ";")


def test_template_bool_append_variants():
    lines = by_strategy(generate_mask_lines(tokenize("if (a < b) {")),
                        TEMPLATE_BOOL_APPEND)
    connectives = {l.kept_prefix[-1].text for l in lines}
    assert connectives == {"&&", "||"}
    sample = [l for l in lines if l.kept_prefix[-1].text == "&&" and l.mask_count == 1]
    assert sample[0].rendered_texts() == ("if", "(", "a", "<", "b", "&&", "<mask>", ")", "{")


def test_method_replace_cap():
    lines = by_strategy(generate_mask_lines(tokenize("x = update(total);")),
                        TEMPLATE_METHOD_REPLACE)
    assert sorted(l.mask_count for l in lines) == list(range(1, 11))


def test_method_replace_on_leading_callee_dedups_into_partial():
    # Masking the callee of a line-leading call renders identically to a
    # partial-before line, which was emitted first and therefore wins.
    lines = generate_mask_lines(tokenize("update(total);"))
    assert by_strategy(lines, TEMPLATE_METHOD_REPLACE) == []
    want = ("<mask>", "(", "total", ")", ";")
    assert any(l.strategy == PARTIAL_BEFORE and l.rendered_texts() == want
               for l in lines)


def test_unparseable_line_gets_only_complete_and_partial():
    lines = generate_mask_lines(tokenize("} ;"))
    assert all(not l.strategy.startswith("template") for l in lines)


def test_strategy_filter():
    tokens = tokenize("if (a < b) {")
    only_complete = generate_mask_lines(tokens, expand_strategies(["complete"]))
    assert {l.strategy for l in only_complete} == {
        COMPLETE_REPLACE, COMPLETE_INSERT_BEFORE, COMPLETE_INSERT_AFTER}
    with pytest.raises(ValueError):
        expand_strategies(["nonsense"])


def test_bool_replace_span():
    lines = by_strategy(generate_mask_lines(tokenize("if (a < b) {")),
                        TEMPLATE_BOOL_REPLACE)
    one = [l for l in lines if l.mask_count == 1][0]
    assert one.rendered_texts() == ("if", "(", "<mask>", ")", "{")


def test_maskline_invariants():
    with pytest.raises(ValueError):
        MaskLine(COMPLETE_REPLACE, (), (), 0)
    with pytest.raises(ValueError):
        MaskLine(COMPLETE_REPLACE, (), (), 1, insertion="before")
    with pytest.raises(ValueError):
        MaskLine(COMPLETE_INSERT_BEFORE, (), (), 1, insertion="replace")
