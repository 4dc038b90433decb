"""Mask-line generation: complete, partial, and template strategies.

A mask line is kept_prefix + mask sentinels + kept_suffix. Complete
strategies mask the whole line (or insert a fresh all-mask line before or
after it); partial strategies keep a proper prefix or suffix of the buggy
line; template strategies target method invocations, boolean conditions,
and common operators found by a lightweight token-level parse.

Every sweep grows the mask count from 1 until the rendered line reaches
ten tokens more than the buggy line, except operator replacement which
always uses exactly one mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .tokens import MASK_SENTINEL, OPERATOR, PUNCTUATION, Token

COMPLETE_REPLACE = "complete-replace"
COMPLETE_INSERT_BEFORE = "complete-insert-before"
COMPLETE_INSERT_AFTER = "complete-insert-after"
PARTIAL_BEFORE = "partial-before"
PARTIAL_AFTER = "partial-after"
TEMPLATE_METHOD_REPLACE = "template-method-replace"
TEMPLATE_PARAM_REPLACE_ALL = "template-param-replace-all"
TEMPLATE_PARAM_REPLACE_ONE = "template-param-replace-one"
TEMPLATE_PARAM_APPEND = "template-param-append"
TEMPLATE_BOOL_REPLACE = "template-bool-replace"
TEMPLATE_BOOL_APPEND = "template-bool-append"
TEMPLATE_OPERATOR_REPLACE = "template-operator-replace"

ALL_STRATEGIES = (
    COMPLETE_REPLACE, COMPLETE_INSERT_BEFORE, COMPLETE_INSERT_AFTER,
    PARTIAL_BEFORE, PARTIAL_AFTER,
    TEMPLATE_METHOD_REPLACE, TEMPLATE_PARAM_REPLACE_ALL,
    TEMPLATE_PARAM_REPLACE_ONE, TEMPLATE_PARAM_APPEND,
    TEMPLATE_BOOL_REPLACE, TEMPLATE_BOOL_APPEND, TEMPLATE_OPERATOR_REPLACE,
)

STRATEGY_FAMILIES = {
    "complete": (COMPLETE_REPLACE, COMPLETE_INSERT_BEFORE, COMPLETE_INSERT_AFTER),
    "partial": (PARTIAL_BEFORE, PARTIAL_AFTER),
    "template": (
        TEMPLATE_METHOD_REPLACE, TEMPLATE_PARAM_REPLACE_ALL,
        TEMPLATE_PARAM_REPLACE_ONE, TEMPLATE_PARAM_APPEND,
        TEMPLATE_BOOL_REPLACE, TEMPLATE_BOOL_APPEND, TEMPLATE_OPERATOR_REPLACE,
    ),
}

# Operators eligible for direct single-mask replacement.
REPLACEABLE_OPERATORS = frozenset(
    {"<", ">", "<=", ">=", "==", "!=", "&&", "||", "+", "-", "*", "/", "%"})

_COMPARISON_OR_LOGICAL = frozenset({"<", ">", "<=", ">=", "==", "!=", "&&", "||"})

# Words that look like calls when followed by "(" but are control flow.
_NON_CALLEE_KEYWORDS = frozenset(
    {"if", "while", "for", "switch", "catch", "return", "synchronized",
     "assert", "else", "do", "try", "not", "and", "or", "elif"})

_EXTRA_TOKEN_GROWTH = 10  # rendered lines may exceed the buggy line by this


def expand_strategies(names):
    """Expand family names (complete/partial/template) and pass through
    individual strategy names; unknown names raise."""
    out = []
    for name in names:
        if name in STRATEGY_FAMILIES:
            out.extend(STRATEGY_FAMILIES[name])
        elif name in ALL_STRATEGIES:
            out.append(name)
        else:
            raise ValueError(f"unknown strategy or family: {name!r}")
    return tuple(dict.fromkeys(out))


@dataclass(frozen=True)
class MaskLine:
    strategy: str
    kept_prefix: tuple
    kept_suffix: tuple
    mask_count: int
    insertion: str = "replace"

    def __post_init__(self):
        object.__setattr__(self, "kept_prefix", tuple(self.kept_prefix))
        object.__setattr__(self, "kept_suffix", tuple(self.kept_suffix))
        if self.mask_count < 1:
            raise ValueError("mask_count must be at least 1")
        if self.insertion not in ("replace", "before", "after"):
            raise ValueError(f"bad insertion: {self.insertion!r}")
        inserting = self.strategy in (COMPLETE_INSERT_BEFORE, COMPLETE_INSERT_AFTER)
        if inserting != (self.insertion in ("before", "after")):
            raise ValueError("insertion mode is tied to the insert strategies")

    @property
    def rendered_length(self):
        return len(self.kept_prefix) + self.mask_count + len(self.kept_suffix)

    def rendered_tokens(self, mask_sentinel="<mask>"):
        masks = [Token(mask_sentinel, MASK_SENTINEL)] * self.mask_count
        return list(self.kept_prefix) + masks + list(self.kept_suffix)

    def rendered_texts(self, mask_sentinel="<mask>"):
        return tuple(t.text for t in self.rendered_tokens(mask_sentinel))


@dataclass(frozen=True)
class MethodCall:
    name_span: tuple  # (start, end) token range of the callee name
    argument_spans: tuple  # one (start, end) per top-level argument
    open_paren: int
    close_paren: int


@dataclass(frozen=True)
class OperatorSite:
    span: tuple
    text: str


@dataclass(frozen=True)
class LineSyntax:
    method_calls: tuple = ()
    boolean_condition: object = None  # (start, end) or None
    operators: tuple = ()


def _matching_paren(tokens, open_index):
    depth = 0
    for i in range(open_index, len(tokens)):
        text = tokens[i].text
        if text == "(":
            depth += 1
        elif text == ")":
            depth -= 1
            if depth == 0:
                return i
    return None


def _split_arguments(tokens, start, end):
    """Top-level comma split of the token range [start, end)."""
    spans = []
    depth = 0
    item_start = start
    for i in range(start, end):
        text = tokens[i].text
        if text in "([{":
            depth += 1
        elif text in ")]}":
            depth -= 1
        elif text == "," and depth == 0:
            spans.append((item_start, i))
            item_start = i + 1
    if item_start < end:
        spans.append((item_start, end))
    return [s for s in spans if s[0] < s[1]]


def _leading_condition(tokens):
    """Condition span of a leading if/while/for header, if any."""
    i = 0
    while i < len(tokens) and tokens[i].text in ("}", "{", "else"):
        i += 1
    if i >= len(tokens) - 1:
        return None
    keyword = tokens[i].text
    if keyword not in ("if", "while", "for") or tokens[i + 1].text != "(":
        return None
    close = _matching_paren(tokens, i + 1)
    if close is None or close == i + 2:
        return None
    if keyword in ("if", "while"):
        return (i + 2, close)
    # for-loop: the condition is the middle clause between top-level ";".
    semis = [j for j in range(i + 2, close)
             if tokens[j].text == ";" and _depth_at(tokens, i + 2, j) == 0]
    if len(semis) < 2 or semis[0] + 1 >= semis[1]:
        return None
    return (semis[0] + 1, semis[1])


def _depth_at(tokens, start, index):
    depth = 0
    for j in range(start, index):
        if tokens[j].text in "([{":
            depth += 1
        elif tokens[j].text in ")]}":
            depth -= 1
    return depth


def _return_condition(tokens):
    if not tokens or tokens[0].text != "return" or len(tokens) < 2:
        return None
    end = len(tokens)
    if tokens[end - 1].text == ";":
        end -= 1
    if end <= 1:
        return None
    if any(tokens[j].text in _COMPARISON_OR_LOGICAL for j in range(1, end)):
        return (1, end)
    return None


def analyze_line(buggy_tokens):
    """Token-level parse for template masking; unparseable lines come back
    empty and simply get no template masks."""
    tokens = list(buggy_tokens)
    calls = []
    for i, token in enumerate(tokens[:-1]):
        if token.kind != "word" or token.text in _NON_CALLEE_KEYWORDS:
            continue
        if tokens[i + 1].text != "(":
            continue
        close = _matching_paren(tokens, i + 1)
        if close is None:
            continue
        spans = _split_arguments(tokens, i + 2, close)
        calls.append(MethodCall(
            name_span=(i, i + 1),
            argument_spans=tuple(spans),
            open_paren=i + 1,
            close_paren=close,
        ))
    condition = _leading_condition(tokens) or _return_condition(tokens)
    sites = tuple(
        OperatorSite(span=(i, i + 1), text=token.text)
        for i, token in enumerate(tokens)
        if token.kind == OPERATOR and token.text in REPLACEABLE_OPERATORS)
    return LineSyntax(
        method_calls=tuple(calls),
        boolean_condition=condition,
        operators=sites,
    )


def generate_mask_lines(buggy_tokens, strategies=ALL_STRATEGIES, mask_sentinel="<mask>"):
    """All mask lines for a buggy line, deterministic order, deduplicated.

    Order is complete, partial-before, partial-after, then templates in
    declaration order; duplicates (same rendered line and insertion mode)
    keep the first occurrence.
    """
    tokens = tuple(buggy_tokens)
    line_len = len(tokens)
    if line_len < 1:
        raise ValueError("buggy line must have at least one token")
    enabled = set(strategies)
    bound = line_len + _EXTRA_TOKEN_GROWTH

    produced = []

    def emit(strategy, prefix, suffix, mask_count, insertion="replace"):
        produced.append(MaskLine(strategy, tuple(prefix), tuple(suffix),
                                 mask_count, insertion))

    def sweep(strategy, prefix, suffix, insertion="replace", cap=None):
        kept = len(prefix) + len(suffix)
        top = bound - kept
        if cap is not None:
            top = min(top, cap)
        for count in range(1, top + 1):
            emit(strategy, prefix, suffix, count, insertion)

    if COMPLETE_REPLACE in enabled:
        sweep(COMPLETE_REPLACE, (), ())
    if COMPLETE_INSERT_BEFORE in enabled:
        sweep(COMPLETE_INSERT_BEFORE, (), (), insertion="before")
    if COMPLETE_INSERT_AFTER in enabled:
        sweep(COMPLETE_INSERT_AFTER, (), (), insertion="after")

    if PARTIAL_BEFORE in enabled:
        for keep in range(1, line_len):
            sweep(PARTIAL_BEFORE, (), tokens[line_len - keep:])
    if PARTIAL_AFTER in enabled:
        for keep in range(1, line_len):
            sweep(PARTIAL_AFTER, tokens[:keep], ())

    syntax = None
    if any(s in enabled for s in STRATEGY_FAMILIES["template"]):
        syntax = analyze_line(tokens)

    if syntax is not None:
        for call in syntax.method_calls:
            name_start, name_end = call.name_span
            if TEMPLATE_METHOD_REPLACE in enabled:
                sweep(TEMPLATE_METHOD_REPLACE,
                      tokens[:name_start], tokens[name_end:], cap=10)
            if TEMPLATE_PARAM_REPLACE_ALL in enabled and call.argument_spans:
                start = call.argument_spans[0][0]
                end = call.argument_spans[-1][1]
                sweep(TEMPLATE_PARAM_REPLACE_ALL, tokens[:start], tokens[end:])
            if TEMPLATE_PARAM_REPLACE_ONE in enabled:
                for start, end in call.argument_spans:
                    sweep(TEMPLATE_PARAM_REPLACE_ONE, tokens[:start], tokens[end:])
            if TEMPLATE_PARAM_APPEND in enabled:
                prefix = list(tokens[:call.close_paren])
                if call.argument_spans:
                    prefix.append(Token(",", PUNCTUATION))
                sweep(TEMPLATE_PARAM_APPEND, prefix, tokens[call.close_paren:])
        if syntax.boolean_condition is not None:
            start, end = syntax.boolean_condition
            if TEMPLATE_BOOL_REPLACE in enabled:
                sweep(TEMPLATE_BOOL_REPLACE, tokens[:start], tokens[end:])
            if TEMPLATE_BOOL_APPEND in enabled:
                for connective in ("&&", "||"):
                    prefix = list(tokens[:end]) + [Token(connective, OPERATOR)]
                    sweep(TEMPLATE_BOOL_APPEND, prefix, tokens[end:])
        if TEMPLATE_OPERATOR_REPLACE in enabled:
            for site in syntax.operators:
                start, end = site.span
                emit(TEMPLATE_OPERATOR_REPLACE, tokens[:start], tokens[end:], 1)

    seen = set()
    unique = []
    for line in produced:
        key = (line.rendered_texts(mask_sentinel), line.insertion)
        if key not in seen:
            seen.add(key)
            unique.append(line)
    return unique
