"""Beam-search mask filling and probabilistic patch ranking.

Filling resolves the leftmost remaining mask of every beam state, scoring
partial fills by the running mean of the log conditional probabilities
observed at generation time (the temp joint score; later masks are still
masked when each token is scored). Completed patches are then re-scored by
masking out one generated token at a time within the fully filled input
and averaging those leave-one-out log probabilities (the joint score),
which is what final ranking and validation order use.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .predictor import PredictorQuery
from .tokens import MASK_SENTINEL, Token, TokenizerConfig, classify, detokenize

_OPENERS = {"(": ")", "{": "}", "[": "]"}
_SKIP_KINDS = ("string-literal", "comment-delim")


@dataclass(frozen=True)
class BeamState:
    filled: tuple  # token texts generated so far, leftmost first
    logprob_sum: float
    source: object  # PredictorInput

    @property
    def temp_joint_score(self):
        if not self.filled:
            return 0.0
        return self.logprob_sum / len(self.filled)


@dataclass(frozen=True)
class CandidatePatch:
    rendered_line: str
    inserted: str  # replace | before | after
    strategy: str
    temp_joint_score: float
    joint_score: float = None
    rank: int = None
    filled_tokens: tuple = ()
    source: object = None

    def identity(self):
        return (self.rendered_line, self.inserted)


def line_well_formed(tokens):
    """Bracket sanity for a rendered line: closers may lead (dangling block
    ends are normal), but once a family has opened, it never over-closes.
    Bracket characters inside string literals and comment delimiters are
    ignored."""
    for opener, closer in _OPENERS.items():
        depth = 0
        opened = False
        for token in tokens:
            if token.kind in _SKIP_KINDS:
                continue
            if token.text == opener:
                depth += 1
                opened = True
            elif token.text == closer:
                if depth > 0:
                    depth -= 1
                elif opened:
                    return False
    return True


def _fill_token(text, config):
    return Token(text, classify(text, config.mask_sentinel))


def _usable_candidate(text, config):
    return bool(text) and "\n" not in text and text != config.mask_sentinel


def beam_fill(predictor_input, beam_width, predictor, config=None,
              well_formed_filter=True):
    """Fill the input's masks left to right under beam search.

    Each step queries the predictor with top_k equal to the beam width and
    keeps the global top-N partial fills by temp joint score (ties break on
    the filled token texts). Returns up to beam_width completed patches,
    best first; rendered lines failing the well-formedness filter are
    dropped before return.
    """
    if beam_width < 1:
        raise ValueError("beam width must be at least 1")
    config = config or TokenizerConfig()
    positions = predictor_input.mask_positions
    if not positions:
        raise ValueError("predictor input has no mask positions")

    working = list(predictor_input.tokens)
    beam = [BeamState(filled=(), logprob_sum=0.0, source=predictor_input)]
    for step, position in enumerate(positions):
        expansions = []
        for state in beam:
            tokens = list(working)
            for i, text in enumerate(state.filled):
                tokens[positions[i]] = _fill_token(text, config)
            query = PredictorQuery(
                tokens=tuple(tokens), mask_index=position, top_k=beam_width)
            for text, logprob in predictor.predict(query).candidates:
                if not _usable_candidate(text, config):
                    continue
                expansions.append(BeamState(
                    filled=state.filled + (text,),
                    logprob_sum=state.logprob_sum + logprob,
                    source=predictor_input))
        if not expansions:
            return []
        expansions.sort(key=lambda s: (-s.temp_joint_score, s.filled))
        beam = expansions[:beam_width]

    mask_line = predictor_input.provenance
    patches = []
    for state in beam:
        rendered_tokens = (
            list(mask_line.kept_prefix)
            + [_fill_token(text, config) for text in state.filled]
            + list(mask_line.kept_suffix))
        if well_formed_filter and not line_well_formed(rendered_tokens):
            continue
        patches.append(CandidatePatch(
            rendered_line=detokenize(rendered_tokens, config),
            inserted=mask_line.insertion,
            strategy=mask_line.strategy,
            temp_joint_score=state.temp_joint_score,
            filled_tokens=state.filled,
            source=predictor_input))
    return patches


def rerank(patches, predictor, config=None):
    """Assign leave-one-out joint scores and re-sort.

    For each patch, every generated position is re-masked in turn within
    the fully filled input and the concrete token is scored there; the
    joint score is the mean. Output is the same multiset ordered by joint
    score (ties: temp joint score, then token texts), with ranks 1..count.
    """
    config = config or TokenizerConfig()
    rescored = []
    for patch in patches:
        source = patch.source
        positions = source.mask_positions
        if len(patch.filled_tokens) != len(positions):
            raise ValueError("patch is not fully filled")
        full = list(source.tokens)
        for i, text in enumerate(patch.filled_tokens):
            full[positions[i]] = _fill_token(text, config)
        total = 0.0
        for i, position in enumerate(positions):
            probe = list(full)
            probe[position] = Token(config.mask_sentinel, MASK_SENTINEL)
            total += predictor.score_token(tuple(probe), position,
                                           patch.filled_tokens[i])
        rescored.append(dataclasses.replace(
            patch, joint_score=total / len(positions)))
    rescored.sort(key=lambda p: (-p.joint_score, -p.temp_joint_score, p.filled_tokens))
    return [dataclasses.replace(patch, rank=i + 1)
            for i, patch in enumerate(rescored)]


def aggregate(per_maskline_results, max_patches):
    """Merge re-ranked per-mask-line patch lists into one ranked list.

    Identical (rendered line, insertion mode) pairs collapse to the one
    with the higher joint score; the merged list is sorted by joint score
    and truncated to max_patches, with ranks reassigned.
    """
    if max_patches < 1:
        raise ValueError("max_patches must be at least 1")
    best = {}
    order = []
    for patches in per_maskline_results:
        for patch in patches:
            if patch.joint_score is None:
                raise ValueError("aggregate requires re-ranked patches")
            key = patch.identity()
            kept = best.get(key)
            if kept is None:
                best[key] = patch
                order.append(key)
            elif patch.joint_score > kept.joint_score:
                best[key] = patch
    merged = [best[key] for key in order]
    merged.sort(key=lambda p: (-p.joint_score, -p.temp_joint_score,
                               p.rendered_line, p.inserted))
    merged = merged[:max_patches]
    return [dataclasses.replace(patch, rank=i + 1)
            for i, patch in enumerate(merged)]
