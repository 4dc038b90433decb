"""Source-line tokenization shared by every stage of the repair pipeline.

Two modes behind one interface:

* ``reference`` -- a deterministic rule-based splitter: whitespace plus
  character-class boundaries, maximal-munch multi-character operators,
  string literals kept intact, ``/*`` ``*/`` ``//`` as comment delimiters.
* ``subword`` -- byte-level byte-pair encoding with a learned merge table.
  Bytes are remapped to printable characters (GPT-2 style) so merge tables
  serialize as plain text and piece texts never contain whitespace.

Whitespace is canonicalized in both modes: runs of blanks collapse to a
single space and indentation is dropped (patch application restores the
original line's indentation). The normalization is idempotent, so
``detokenize(tokenize(s))`` reproduces ``s`` up to that one rewrite.

The mask sentinel is atomic: it never splits, never merges, and scans with
top priority, even where it would otherwise fall inside a string literal.
Numeric tokens are digit runs only ("." is always punctuation); this keeps
the around-"." spacing rule from gluing tokens into text that would
re-tokenize differently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

WORD = "word"
NUMBER = "number"
OPERATOR = "operator"
PUNCTUATION = "punctuation"
MASK_SENTINEL = "mask-sentinel"
COMMENT_DELIM = "comment-delim"
STRING_LITERAL = "string-literal"

TOKEN_KINDS = frozenset(
    {WORD, NUMBER, OPERATOR, PUNCTUATION, MASK_SENTINEL, COMMENT_DELIM, STRING_LITERAL}
)

_WORD_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_$")
_WORD_CHARS = _WORD_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")
_OPERATOR_CHARS = frozenset("+-*/%<>=!&|^~")

# Longest first so the scanner munches maximally.
_MULTI_OPERATORS = (
    "<=", ">=", "==", "!=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "->", "<<", ">>",
)
_COMMENT_DELIMS = ("/*", "*/", "//")

# Rendering table. "(" suppresses on both sides so calls render as f(x);
# "." binds tight on both sides; closers and separators bind left.
_NO_SPACE_BEFORE = frozenset({";", ",", ")", "(", "."})
_NO_SPACE_AFTER = frozenset({"(", "."})


class MaskStillPresent(ValueError):
    """detokenize() was handed a sequence that still contains mask sentinels."""


class EmptyCorpus(ValueError):
    """A training operation received an empty corpus."""


@dataclass(frozen=True)
class Token:
    text: str
    kind: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")
        if "\n" in self.text:
            raise ValueError("token text must not contain newlines")
        if self.kind not in TOKEN_KINDS:
            raise ValueError(f"unknown token kind: {self.kind!r}")

    def __repr__(self):
        return f"Token({self.text!r}, {self.kind})"


@dataclass(frozen=True)
class TokenizerConfig:
    mode: str = "reference"
    mask_sentinel: str = "<mask>"
    subword_merges: tuple = ()  # ((left, right), ...) in priority order
    max_sequence_tokens: int = 512

    def __post_init__(self):
        if self.mode not in ("reference", "subword"):
            raise ValueError(f"unknown tokenizer mode: {self.mode!r}")
        if not self.mask_sentinel or self.mask_sentinel.strip() != self.mask_sentinel:
            raise ValueError("mask sentinel must be non-empty and free of edge whitespace")
        if self.max_sequence_tokens < 16:
            raise ValueError("max_sequence_tokens must be at least 16")
        object.__setattr__(
            self, "subword_merges", tuple((a, b) for a, b in self.subword_merges)
        )


def classify(text, mask_sentinel="<mask>"):
    """Kind of a standalone token string (used when adopting predictor output)."""
    if text == mask_sentinel:
        return MASK_SENTINEL
    if text in _COMMENT_DELIMS:
        return COMMENT_DELIM
    if all(c in _DIGITS for c in text):
        return NUMBER
    if text[0] in _WORD_START and all(c in _WORD_CHARS for c in text):
        return WORD
    if text in _MULTI_OPERATORS or (len(text) == 1 and text in _OPERATOR_CHARS):
        return OPERATOR
    if len(text) >= 2 and text[0] in "\"'" and text[-1] == text[0]:
        return STRING_LITERAL
    return PUNCTUATION


def tokenize(text, config=None):
    """Split text into tokens under the config's mode. Any text tokenizes."""
    config = config or TokenizerConfig()
    if config.mode == "reference":
        return _reference_tokenize(text, config.mask_sentinel)
    return _subword_tokenize(text, config)


def detokenize(tokens, config=None):
    """Render tokens back to one line of text.

    Reference mode joins with single spaces minus the spacing table; subword
    mode concatenates the byte pieces. Raises MaskStillPresent if any mask
    sentinel remains (a mask line is not text until it is filled).
    """
    config = config or TokenizerConfig()
    for token in tokens:
        if token.kind == MASK_SENTINEL:
            raise MaskStillPresent(f"mask sentinel {token.text!r} in detokenize input")
    if config.mode == "subword":
        return _decode_pieces(token.text for token in tokens)
    parts = []
    previous = None
    for token in tokens:
        if previous is not None and token.text not in _NO_SPACE_BEFORE \
                and previous not in _NO_SPACE_AFTER:
            parts.append(" ")
        parts.append(token.text)
        previous = token.text
    return "".join(parts)


# --- reference mode -------------------------------------------------------


def _reference_tokenize(text, sentinel):
    tokens = []
    i = 0
    end = len(text)
    while i < end:
        if text.startswith(sentinel, i):
            tokens.append(Token(sentinel, MASK_SENTINEL))
            i += len(sentinel)
            continue
        c = text[i]
        if c.isspace():
            i += 1
            continue
        two = text[i:i + 2]
        if two in _COMMENT_DELIMS:
            tokens.append(Token(two, COMMENT_DELIM))
            i += 2
            continue
        if c in "\"'":
            literal = _scan_string(text, i, c, sentinel)
            if literal is not None:
                tokens.append(Token(literal, STRING_LITERAL))
                i += len(literal)
                continue
            tokens.append(Token(c, PUNCTUATION))
            i += 1
            continue
        if c in _WORD_START:
            j = i + 1
            while j < end and text[j] in _WORD_CHARS and not text.startswith(sentinel, j):
                j += 1
            tokens.append(Token(text[i:j], WORD))
            i = j
            continue
        if c in _DIGITS:
            j = i + 1
            while j < end and text[j] in _DIGITS:
                j += 1
            tokens.append(Token(text[i:j], NUMBER))
            i = j
            continue
        if two in _MULTI_OPERATORS and not text.startswith(sentinel, i):
            tokens.append(Token(two, OPERATOR))
            i += 2
            continue
        if c in _OPERATOR_CHARS and not text.startswith(sentinel, i):
            tokens.append(Token(c, OPERATOR))
            i += 1
            continue
        tokens.append(Token(c, PUNCTUATION))
        i += 1
    return tokens


def _scan_string(text, start, quote, sentinel):
    """Span of a string literal starting at ``start``, or None if the span
    would swallow a mask sentinel or a newline (sentinel atomicity wins)."""
    i = start + 1
    while i < len(text):
        c = text[i]
        if c == "\\":
            i += 2
            continue
        if c == "\n":
            return None
        if c == quote:
            literal = text[start:i + 1]
            return None if sentinel in literal else literal
        i += 1
    # Unterminated: take the rest of the line unless the sentinel hides in it.
    literal = text[start:]
    if sentinel in literal or "\n" in literal:
        return None
    return literal


# --- subword mode ---------------------------------------------------------


def _byte_to_unicode():
    """Invertible byte -> printable char map (the classic BPE remapping)."""
    keep = list(range(ord("!"), ord("~") + 1)) \
        + list(range(0xA1, 0xAD)) + list(range(0xAE, 0x100))
    chars = keep[:]
    offset = 0
    for b in range(256):
        if b not in keep:
            keep.append(b)
            chars.append(0x100 + offset)
            offset += 1
    return {b: chr(c) for b, c in zip(keep, chars)}


_BYTE_ENCODER = _byte_to_unicode()
_BYTE_DECODER = {c: b for b, c in _BYTE_ENCODER.items()}


def _encode_chunk(chunk):
    return tuple(_BYTE_ENCODER[b] for b in chunk.encode("utf-8"))


def _decode_pieces(pieces):
    out = bytearray()
    for piece in pieces:
        if piece and all(ch in _BYTE_DECODER for ch in piece):
            out.extend(_BYTE_DECODER[ch] for ch in piece)
        else:
            out.extend(piece.encode("utf-8"))
    return out.decode("utf-8", errors="replace")


def _normalize(text):
    return " ".join(text.split())


def _sentinel_split(text, sentinel):
    """Segments of text, with sentinel occurrences as the marker None."""
    segments = []
    rest = text
    while True:
        idx = rest.find(sentinel)
        if idx < 0:
            segments.append(rest)
            return segments
        segments.append(rest[:idx])
        segments.append(None)
        rest = rest[idx + len(sentinel):]


def _pre_chunks(text, sentinel):
    """Space-carrying chunks for BPE; None marks a protected sentinel."""
    chunks = []
    for segment in _sentinel_split(_normalize(text), sentinel):
        if segment is None:
            chunks.append(None)
            continue
        start = 0
        while start < len(segment):
            next_space = segment.find(" ", start + 1)
            if next_space < 0:
                next_space = len(segment)
            chunks.append(segment[start:next_space])
            start = next_space
    return [c for c in chunks if c != ""]


def _apply_merges(symbols, ranks):
    symbols = list(symbols)
    while len(symbols) >= 2:
        best_rank = None
        best_index = -1
        for i in range(len(symbols) - 1):
            rank = ranks.get((symbols[i], symbols[i + 1]))
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank = rank
                best_index = i
        if best_rank is None:
            break
        symbols[best_index:best_index + 2] = [symbols[best_index] + symbols[best_index + 1]]
    return symbols


def _subword_tokenize(text, config):
    ranks = {pair: i for i, pair in enumerate(config.subword_merges)}
    tokens = []
    for chunk in _pre_chunks(text, config.mask_sentinel):
        if chunk is None:
            tokens.append(Token(config.mask_sentinel, MASK_SENTINEL))
            continue
        for piece in _apply_merges(_encode_chunk(chunk), ranks):
            tokens.append(Token(piece, _piece_kind(piece)))
    return tokens


def _piece_kind(piece):
    bare = piece.lstrip("Ġ")  # remapped space prefix
    if not bare:
        return PUNCTUATION
    return classify(bare, mask_sentinel="\x00")


def train_subword(corpus, merges, mask_sentinel="<mask>", max_sequence_tokens=512):
    """Learn a byte-pair merge table and return a subword-mode config.

    Deterministic for a given corpus order and merge count; ties in pair
    frequency break on the lexicographically smaller pair.
    """
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("cannot train a subword tokenizer on an empty corpus")
    words = []
    for line in corpus:
        for chunk in _pre_chunks(line, mask_sentinel):
            if chunk is not None:
                words.append(list(_encode_chunk(chunk)))
    table = []
    for _ in range(merges):
        counts = {}
        for symbols in words:
            for pair in zip(symbols, symbols[1:]):
                counts[pair] = counts.get(pair, 0) + 1
        if not counts:
            break
        best = min(counts, key=lambda p: (-counts[p], p))
        table.append(best)
        merged = best[0] + best[1]
        for symbols in words:
            i = 0
            while i < len(symbols) - 1:
                if symbols[i] == best[0] and symbols[i + 1] == best[1]:
                    symbols[i:i + 2] = [merged]
                else:
                    i += 1
    return TokenizerConfig(
        mode="subword",
        mask_sentinel=mask_sentinel,
        subword_merges=tuple(table),
        max_sequence_tokens=max_sequence_tokens,
    )


def save_merges(path, config):
    """Write the merge table, one 'left right' pair per line (priority order)."""
    with open(path, "w", encoding="utf-8") as handle:
        for left, right in config.subword_merges:
            handle.write(f"{left} {right}\n")


def load_merges(path, **config_kwargs):
    """Read a merge table written by save_merges into a subword config."""
    table = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            left, right = line.split(" ")
            table.append((left, right))
    return TokenizerConfig(mode="subword", subword_merges=tuple(table), **config_kwargs)
