"""Corpus-scale evaluation with the strategy ablation table: how many bugs
each cumulative strategy family fixes, in the style of a component
contribution study."""

import tempfile
from pathlib import Path

from clozerepair.corpus import (
    ablation_metrics,
    evaluate_corpus,
    format_ablation,
    format_metrics,
    generate_bug_corpus,
    train_corpus_predictor,
)

with tempfile.TemporaryDirectory() as scratch:
    corpus_dir = generate_bug_corpus(seed=3, count=10, out_dir=Path(scratch) / "bugs")
    predictor = train_corpus_predictor(corpus_dir)

    print("full-strategy evaluation (beam width 2):")
    metrics = evaluate_corpus(corpus_dir, predictor=predictor, beam_width=2,
                              max_patches=100000, per_patch_timeout=20.0)
    print(format_metrics(metrics))
    print()

    print("cumulative strategy ablation (beam width 1):")
    ablation = ablation_metrics(corpus_dir, predictor=predictor, beam_width=1,
                                max_patches=100000, per_patch_timeout=20.0)
    print(format_ablation(ablation))
