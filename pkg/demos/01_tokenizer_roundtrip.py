"""Tokenization in both modes: the rule-based reference splitter and a
trained byte-pair subword mode, with the round-trip guarantee on display."""

import tempfile
from pathlib import Path

from clozerepair import TokenizerConfig, detokenize, tokenize, train_subword
from clozerepair.tokens import load_merges, save_merges

reference = TokenizerConfig()

line = "if (endIndex < 0 || !range.contains(startIndex)) {"
tokens = tokenize(line, reference)
print("line     :", line)
print("tokens   :", [t.text for t in tokens])
print("kinds    :", sorted({t.kind for t in tokens}))
print("rendered :", detokenize(tokens, reference))
print()

masked = "return <mask> && !hasExp;"
print("masked   :", [f"{t.text}/{t.kind}" for t in tokenize(masked, reference)])
print()

corpus = [
    "total = total + stride;",
    "total = total + offset;",
    "if (total < limit) {",
]
subword = train_subword(corpus, merges=25)
print("learned merges:", subword.subword_merges[:8], "...")
pieces = tokenize("total = total + limit;", subword)
print("subword pieces:", [t.text for t in pieces])
print("reassembled   :", detokenize(pieces, subword))

with tempfile.TemporaryDirectory() as scratch:
    table = Path(scratch) / "merges.txt"
    save_merges(table, subword)
    print("merge file head:", table.read_text().splitlines()[:4])
    reloaded = load_merges(table)
    assert tokenize("total = total", reloaded) == tokenize("total = total", subword)
    print("merge table round-trips through its file")
