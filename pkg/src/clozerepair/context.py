"""Predictor-input assembly for one (buggy line, mask line) pair.

The prompt layout is fixed for every strategy, insertions included:

    [context before] [/* buggy line */] [mask line] [context after]

Context grows one whole source line at a time, alternating before/after
starting nearest the bug, and stops at the first line that would overflow
the token budget. The comment-wrapped buggy line and the mask line are
always present; if they alone exceed the budget the mask line is skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .tokens import (
    COMMENT_DELIM,
    MASK_SENTINEL,
    PUNCTUATION,
    WORD,
    Token,
    TokenizerConfig,
    tokenize,
)

# Zero-width-space escapes: an interior "*/" must not terminate the comment
# wrapper, and a literal sentinel in context must not register as a mask.
_ESCAPED_CLOSER = "*​/"
_SENTINEL_ESCAPE = "​"


class CoreTooLarge(ValueError):
    """Comment-wrapped buggy line plus mask line exceed the token budget."""


@dataclass(frozen=True)
class RepairTask:
    """One bug-fixing job: a source file, the suspicious line, and budgets."""

    source_lines: tuple
    buggy_line_index: int
    build_command: object = None
    test_command: object = None
    beam_width: int = 25
    max_patches: int = 5000
    wall_clock_limit: float = 5 * 3600.0

    def __post_init__(self):
        object.__setattr__(self, "source_lines", tuple(self.source_lines))
        if not (0 <= self.buggy_line_index < len(self.source_lines)):
            raise ValueError(
                f"buggy_line_index {self.buggy_line_index} outside file of "
                f"{len(self.source_lines)} lines")
        if self.beam_width < 1:
            raise ValueError("beam_width must be at least 1")
        if self.max_patches < 1:
            raise ValueError("max_patches must be at least 1")

    @property
    def buggy_line(self):
        return self.source_lines[self.buggy_line_index]


@dataclass(frozen=True)
class PredictorInput:
    tokens: tuple
    mask_positions: tuple
    provenance: object  # the MaskLine this input was built for

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "mask_positions", tuple(self.mask_positions))


def wrap_as_comment(buggy_tokens):
    """["/*"] + sanitized buggy tokens + ["*/"].

    Interior "*/" tokens are rewritten with a zero-width space so the
    comment cannot terminate early.
    """
    inner = []
    for token in buggy_tokens:
        if token.text == "*/":
            token = Token(_ESCAPED_CLOSER, PUNCTUATION)
        inner.append(token)
    return [Token("/*", COMMENT_DELIM)] + inner + [Token("*/", COMMENT_DELIM)]


def _neutralize_sentinels(tokens, sentinel):
    """Rewrite literal mask sentinels appearing in context or buggy text so
    mask_positions can index exactly the mask line's sentinels."""
    out = []
    for token in tokens:
        if token.kind == MASK_SENTINEL:
            token = Token(sentinel[:-1] + _SENTINEL_ESCAPE + sentinel[-1], WORD)
        out.append(token)
    return out


def build_input(task, mask_line, config=None):
    """Assemble the predictor input for one mask line of a repair task."""
    config = config or TokenizerConfig()
    budget = config.max_sequence_tokens
    sentinel = config.mask_sentinel

    buggy_tokens = _neutralize_sentinels(tokenize(task.buggy_line, config), sentinel)
    comment = wrap_as_comment(buggy_tokens)
    line_tokens = mask_line.rendered_tokens(sentinel)

    core_size = len(comment) + len(line_tokens)
    if core_size > budget:
        raise CoreTooLarge(
            f"comment ({len(comment)}) + mask line ({len(line_tokens)}) "
            f"exceed budget {budget}")

    before = []  # nearest-first
    after = []
    remaining = budget - core_size
    offset_before = 1
    offset_after = 1
    take_before = True
    exhausted_before = task.buggy_line_index - offset_before < 0
    exhausted_after = task.buggy_line_index + offset_after >= len(task.source_lines)
    while not (exhausted_before and exhausted_after):
        if take_before and not exhausted_before:
            index = task.buggy_line_index - offset_before
        elif not take_before and not exhausted_after:
            index = task.buggy_line_index + offset_after
        else:
            take_before = not take_before
            continue
        line = _neutralize_sentinels(tokenize(task.source_lines[index], config), sentinel)
        if len(line) > remaining:
            break
        remaining -= len(line)
        if take_before:
            before.append(line)
            offset_before += 1
            exhausted_before = task.buggy_line_index - offset_before < 0
        else:
            after.append(line)
            offset_after += 1
            exhausted_after = task.buggy_line_index + offset_after >= len(task.source_lines)
        take_before = not take_before

    tokens = []
    for line in reversed(before):
        tokens.extend(line)
    tokens.extend(comment)
    mask_start = len(tokens)
    tokens.extend(line_tokens)
    for line in after:
        tokens.extend(line)

    positions = tuple(
        mask_start + i for i, token in enumerate(line_tokens)
        if token.kind == MASK_SENTINEL)
    return PredictorInput(tokens=tuple(tokens), mask_positions=positions,
                          provenance=mask_line)
