"""The whole pipeline on one synthetic bug: generate a seeded corpus, train
the reference predictor on the unbugged sources, and let the engine mask,
fill, re-rank, and validate until a plausible patch appears."""

import json
import tempfile
from pathlib import Path

from clozerepair import RepairConfig, run_repair
from clozerepair.corpus import generate_bug_corpus, load_corpus, train_corpus_predictor

with tempfile.TemporaryDirectory() as scratch:
    corpus_dir = generate_bug_corpus(seed=1, count=5, out_dir=Path(scratch) / "bugs")
    _, bugs = load_corpus(corpus_dir)
    bug = bugs[0]
    print("bug class :", bug["bug_class"])
    print("buggy line:", bug["buggy_line"].strip())
    print("fixed line:", bug["fixed_line"].strip())
    print()

    predictor = train_corpus_predictor(corpus_dir)
    config = RepairConfig(
        project_dir=bug["dir"],
        source_file=bug["file"],
        buggy_line=bug["buggy_line_index"],
        build_command=bug["build_command"],
        test_command=bug["test_command"],
        beam_width=3,
        max_patches=400,
        per_patch_timeout=30.0,
        report_dir=str(Path(scratch) / "report"),
    )
    report = run_repair(config, predictor=predictor)

    print("status:", report.status)
    validated = [r for r in report.records if r["status"] != "unattempted"]
    print("patches validated:", len(validated))
    print("top plausible patches:")
    for entry in report.plausible[:5]:
        print(f"  #{entry['rank']} joint {entry['joint_score']:+.4f} "
              f"[{entry['inserted']}] {entry['rendered_line']}")
    summary = json.loads((Path(scratch) / "report" / "summary.json").read_text())
    print("report digest:", summary["task_digest"][:16], "...")
