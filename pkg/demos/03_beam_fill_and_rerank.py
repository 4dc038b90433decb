"""Grouped-mask filling under beam search, then leave-one-out re-ranking.

The temp joint score accrued during generation is conditioned on masks that
are still unresolved; the joint score re-queries the predictor around each
generated token in the completed line, and the final ranking can differ.
"""

from clozerepair import RepairTask, beam_fill, build_input, rerank, train_reference
from clozerepair.masks import MaskLine, PARTIAL_AFTER
from clozerepair.tokens import TokenizerConfig, tokenize

corpus = [
    "if (startIndex < 0 || endIndex < 0) {",
    "if (startIndex > endIndex) {",
    "return range(startIndex, endIndex);",
    "if (endIndex < 0 || startIndex < 0) {",
]
predictor = train_reference(corpus)
config = TokenizerConfig()

buggy = "if (endIndex < 0 || endIndex < 0) {"
task = RepairTask(
    source_lines=["int startIndex = first();", buggy, "return span;"],
    buggy_line_index=1)

prefix = tuple(tokenize("if ( endIndex < 0 ||"))
suffix = tuple(tokenize(") {"))
mask_line = MaskLine(PARTIAL_AFTER, prefix, suffix, 3)
built = build_input(task, mask_line, config)
print("masked input line:", " ".join(t.text for t in mask_line.rendered_tokens()))
print()

patches = beam_fill(built, beam_width=4, predictor=predictor, config=config)
print("beam results by temp joint score:")
for patch in patches:
    print(f"  {patch.temp_joint_score:+.4f}  {patch.rendered_line}")
print()

ranked = rerank(patches, predictor, config)
print("after leave-one-out re-ranking:")
for patch in ranked:
    moved = "" if patch.rendered_line == patches[patch.rank - 1].rendered_line \
        else "  (moved)"
    print(f"  #{patch.rank} joint {patch.joint_score:+.4f} "
          f"temp {patch.temp_joint_score:+.4f}  {patch.rendered_line}{moved}")
