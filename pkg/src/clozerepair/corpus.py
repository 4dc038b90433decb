"""Synthetic single-line-bug corpus: generation and evaluation.

Each bug directory holds a small self-testing Python program with exactly
one line changed from its ground truth, a manifest naming the buggy line,
the fixed line, and build/test commands, plus a shared training corpus of
the unbugged sources. Bug classes: operator flip, wrong identifier,
off-by-one literal, dropped guard conjunct, wrong callee. Generation is
deterministic per seed: the same seed always produces byte-identical
corpora.
"""

from __future__ import annotations

import json
import random
import time
from pathlib import Path

from .orchestrator import RepairConfig, run_repair
from .predictor import train_reference
from .tokens import tokenize

BUG_CLASSES = (
    "operator-flip",
    "wrong-identifier",
    "off-by-one-literal",
    "dropped-conjunct",
    "wrong-callee",
)

# -S/-B keep interpreter startup cheap; validation spawns these thousands
# of times.
BUILD_COMMAND = [
    "python3", "-S", "-B", "-c",
    "compile(open('program.py', 'rb').read(), 'program.py', 'exec')",
]
TEST_COMMAND = ["python3", "-S", "-B", "tests.py"]

TESTS_PROLOGUE = """\
import signal
import sys

import program

if hasattr(signal, "alarm"):
    signal.alarm(10)  # watchdog: a runaway patch must not stall validation

failures = []


def check(name, hold):
    try:
        ok = hold()
    except Exception:
        ok = False
    if not ok:
        failures.append(name)

"""

TESTS_EPILOGUE = """
for name in failures:
    print("FAIL: " + name)
sys.exit(1 if failures else 0)
"""


# --- program templates ------------------------------------------------------
#
# Every template returns the fixed program lines, check expressions that hold
# on the fixed program, and the injectable bug sites. Every site's buggy
# variant is caught by at least one check (verified by the corpus tests).


def _t_clamp(rng):
    fn = rng.choice(["clip_value", "bound_value", "pin_range", "clamp_level"])
    v = rng.choice(["value", "amount", "reading", "sample"])
    lo = rng.choice(["low", "floor", "lower", "minimum"])
    hi = rng.choice(["high", "ceiling", "upper", "maximum"])
    program = [
        f"def {fn}({v}, {lo}, {hi}):",
        f"    if {v} < {lo}:",
        f"        return {lo}",
        f"    if {v} > {hi}:",
        f"        return {hi}",
        f"    return {v}",
    ]
    checks = [
        f"program.{fn}(1, 2, 5) == 2",
        f"program.{fn}(9, 2, 5) == 5",
        f"program.{fn}(3, 2, 5) == 3",
        f"program.{fn}(2, 2, 5) == 2",
        f"program.{fn}(5, 2, 5) == 5",
    ]
    sites = [
        {"bug_class": "operator-flip", "line_index": 1,
         "buggy_line": f"    if {v} {rng.choice(['>', '=='])} {lo}:"},
        {"bug_class": "operator-flip", "line_index": 3,
         "buggy_line": f"    if {v} {rng.choice(['<', '=='])} {hi}:"},
        {"bug_class": "wrong-identifier", "line_index": 2,
         "buggy_line": f"        return {hi}"},
        {"bug_class": "wrong-identifier", "line_index": 5,
         "buggy_line": f"    return {lo}"},
    ]
    return program, checks, sites


def _t_safe_ratio(rng):
    fn = rng.choice(["safe_ratio", "per_unit", "divide_or_zero", "split_evenly"])
    num = rng.choice(["num", "total", "dividend", "amount"])
    den = rng.choice(["den", "divisor", "parts", "base"])
    program = [
        f"def {fn}({num}, {den}):",
        f"    if {den} == 0:",
        "        return 0",
        f"    return {num} / {den}",
    ]
    checks = [
        f"program.{fn}(6, 3) == 2",
        f"program.{fn}(5, 0) == 0",
        f"program.{fn}(8, 2) == 4",
    ]
    sites = [
        {"bug_class": "operator-flip", "line_index": 1,
         "buggy_line": f"    if {den} != 0:"},
        {"bug_class": "off-by-one-literal", "line_index": 2,
         "buggy_line": "        return 1"},
        {"bug_class": "wrong-identifier", "line_index": 3,
         "buggy_line": f"    return {num} / {num}"},
    ]
    return program, checks, sites


def _t_count_above(rng):
    fn = rng.choice(["count_above", "tally_over", "count_exceeding", "hits_above"])
    items = rng.choice(["items", "values", "readings", "samples"])
    limit = rng.choice(["limit", "cutoff", "threshold", "bar"])
    item = rng.choice(["item", "entry", "current", "candidate"])
    total = rng.choice(["total", "count", "hits", "seen"])
    program = [
        f"def {fn}({items}, {limit}):",
        f"    {total} = 0",
        f"    for {item} in {items}:",
        f"        if {item} > {limit}:",
        f"            {total} = {total} + 1",
        f"    return {total}",
    ]
    checks = [
        f"program.{fn}([1, 5, 7], 4) == 2",
        f"program.{fn}([4, 5], 4) == 1",
        f"program.{fn}([], 3) == 0",
    ]
    sites = [
        {"bug_class": "operator-flip", "line_index": 3,
         "buggy_line": f"        if {item} {rng.choice(['<', '>=', '==', '!='])} {limit}:"},
        {"bug_class": "off-by-one-literal", "line_index": 4,
         "buggy_line": f"            {total} = {total} + 2"},
        {"bug_class": "wrong-identifier", "line_index": 3,
         "buggy_line": f"        if {total} > {limit}:"},
    ]
    return program, checks, sites


def _t_index_guard(rng):
    fn = rng.choice(["valid_index", "in_range", "index_ok", "within_bounds"])
    idx = rng.choice(["idx", "index", "pos", "slot"])
    size = rng.choice(["size", "length", "bound", "capacity"])
    program = [
        f"def {fn}({idx}, {size}):",
        f"    if {idx} >= 0 and {idx} < {size}:",
        "        return True",
        "    return False",
    ]
    checks = [
        f"program.{fn}(0, 3)",
        f"program.{fn}(2, 3)",
        f"not program.{fn}(3, 3)",
        f"not program.{fn}(-1, 3)",
    ]
    sites = [
        {"bug_class": "dropped-conjunct", "line_index": 1,
         "buggy_line": f"    if {idx} >= 0:"},
        {"bug_class": "operator-flip", "line_index": 1,
         "buggy_line": f"    if {idx} > 0 and {idx} < {size}:"},
        {"bug_class": "operator-flip", "line_index": 1,
         "buggy_line": f"    if {idx} >= 0 and {idx} <= {size}:"},
    ]
    return program, checks, sites


def _t_pick_extreme(rng):
    fn = rng.choice(["pick_value", "choose_one", "select_extreme", "resolve_pair"])
    a, b = rng.sample(["first", "second", "left", "right"], 2)
    good, bad = rng.choice([("max", "min"), ("min", "max")])
    picker = {"max": max, "min": min}[good]
    cases = [(2, 7), (9, 1), (4, 4)]
    program = [
        f"def {fn}({a}, {b}):",
        f"    return {good}({a}, {b})",
    ]
    checks = [
        f"program.{fn}({x}, {y}) == {picker(x, y)}" for x, y in cases
    ]
    sites = [
        {"bug_class": "wrong-callee", "line_index": 1,
         "buggy_line": f"    return {bad}({a}, {b})"},
    ]
    return program, checks, sites


def _t_sum_below(rng):
    # range-based on purpose: no corpus template may loop unboundedly, so no
    # generated patch can either (the corpus vocabulary has no while).
    fn = rng.choice(["sum_below", "triangle", "accumulate", "running_total"])
    n = rng.choice(["n", "stop", "upper", "bound"])
    total = rng.choice(["total", "acc", "running", "gathered"])
    i = rng.choice(["i", "j", "k", "step"])
    program = [
        f"def {fn}({n}):",
        f"    {total} = 0",
        f"    for {i} in range({n}):",
        f"        {total} = {total} + {i}",
        f"    return {total}",
    ]
    checks = [
        f"program.{fn}(4) == 6",
        f"program.{fn}(1) == 0",
        f"program.{fn}(0) == 0",
    ]
    sites = [
        {"bug_class": "operator-flip", "line_index": 3,
         "buggy_line": f"        {total} = {total} - {i}"},
        {"bug_class": "off-by-one-literal", "line_index": 2,
         "buggy_line": f"    for {i} in range({n} - 1):"},
        {"bug_class": "wrong-identifier", "line_index": 3,
         "buggy_line": f"        {total} = {total} + {n}"},
    ]
    return program, checks, sites


def _t_threshold(rng):
    fn = rng.choice(["passes", "meets_cutoff", "qualifies", "above_cutoff"])
    score = rng.choice(["score", "mark", "points", "measure"])
    cutoff = rng.choice(["cutoff", "passing", "needed", "barrier"])
    program = [
        f"def {fn}({score}, {cutoff}):",
        f"    return {score} >= {cutoff}",
    ]
    checks = [
        f"program.{fn}(5, 5)",
        f"not program.{fn}(4, 5)",
        f"program.{fn}(6, 5)",
    ]
    sites = [
        {"bug_class": "operator-flip", "line_index": 1,
         "buggy_line":
             f"    return {score} {rng.choice(['>', '<', '<=', '==', '!='])} {cutoff}"},
    ]
    return program, checks, sites


def _t_abs_diff(rng):
    fn = rng.choice(["gap", "absolute_gap", "distance", "spread"])
    a, b = rng.sample(["a", "b", "lhs", "rhs"], 2)
    program = [
        f"def {fn}({a}, {b}):",
        f"    if {a} > {b}:",
        f"        return {a} - {b}",
        f"    return {b} - {a}",
    ]
    checks = [
        f"program.{fn}(7, 2) == 5",
        f"program.{fn}(2, 7) == 5",
        f"program.{fn}(3, 3) == 0",
    ]
    sites = [
        {"bug_class": "operator-flip", "line_index": 1,
         "buggy_line": f"    if {a} < {b}:"},
        {"bug_class": "operator-flip", "line_index": 2,
         "buggy_line": f"        return {a} + {b}"},
        {"bug_class": "wrong-identifier", "line_index": 3,
         "buggy_line": f"    return {b} - {b}"},
    ]
    return program, checks, sites


_TEMPLATES = (
    _t_clamp, _t_safe_ratio, _t_count_above, _t_index_guard,
    _t_pick_extreme, _t_sum_below, _t_threshold, _t_abs_diff,
)

_TEMPLATES_BY_CLASS = {
    bug_class: tuple(
        template for template in _TEMPLATES
        if any(site["bug_class"] == bug_class
               for site in template(random.Random(0))[2]))
    for bug_class in BUG_CLASSES
}


def _flipped_token(fixed_line, buggy_line):
    """Index and texts of the single differing token, if exactly one."""
    fixed = [t.text for t in tokenize(fixed_line.strip())]
    buggy = [t.text for t in tokenize(buggy_line.strip())]
    if len(fixed) != len(buggy):
        return None, None, None
    diffs = [i for i, (f, b) in enumerate(zip(fixed, buggy)) if f != b]
    if len(diffs) != 1:
        return None, None, None
    i = diffs[0]
    return i, buggy[i], fixed[i]


def generate_bug_corpus(seed, count, out_dir):
    """Write `count` bug directories under out_dir, deterministic per seed."""
    if count < 1:
        raise ValueError("count must be at least 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    entries = []
    training_lines = []
    for index in range(count):
        bug_class = BUG_CLASSES[index % len(BUG_CLASSES)]
        template = rng.choice(_TEMPLATES_BY_CLASS[bug_class])
        program, checks, sites = template(rng)
        site = rng.choice([s for s in sites if s["bug_class"] == bug_class])
        fixed_line = program[site["line_index"]]
        buggy_line = site["buggy_line"]
        buggy_program = list(program)
        buggy_program[site["line_index"]] = buggy_line

        op_index, buggy_op, fixed_op = (None, None, None)
        if bug_class == "operator-flip":
            op_index, buggy_op, fixed_op = _flipped_token(fixed_line, buggy_line)

        name = f"bug_{index:03d}"
        bug_dir = out_dir / name
        bug_dir.mkdir(exist_ok=True)
        (bug_dir / "program.py").write_text("\n".join(buggy_program) + "\n")
        tests_text = TESTS_PROLOGUE + "".join(
            f'check("case_{i}", lambda: {expr})\n' for i, expr in enumerate(checks)
        ) + TESTS_EPILOGUE
        (bug_dir / "tests.py").write_text(tests_text)
        manifest = {
            "bug_class": bug_class,
            "file": "program.py",
            "buggy_line_index": site["line_index"],
            "buggy_line": buggy_line,
            "fixed_line": fixed_line,
            "op_token_index": op_index,
            "buggy_op": buggy_op,
            "fixed_op": fixed_op,
            "build_command": BUILD_COMMAND,
            "test_command": TEST_COMMAND,
        }
        (bug_dir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        entries.append({"dir": name, "bug_class": bug_class})
        training_lines.extend(program)
        training_lines.append("")

    (out_dir / "training_corpus.txt").write_text("\n".join(training_lines) + "\n")
    (out_dir / "manifest.json").write_text(json.dumps(
        {"seed": seed, "count": count, "bugs": entries},
        sort_keys=True, indent=2) + "\n")
    return out_dir


def load_corpus(corpus_dir):
    corpus_dir = Path(corpus_dir)
    with open(corpus_dir / "manifest.json", encoding="utf-8") as handle:
        manifest = json.load(handle)
    bugs = []
    for entry in manifest["bugs"]:
        with open(corpus_dir / entry["dir"] / "manifest.json",
                  encoding="utf-8") as handle:
            bug = json.load(handle)
        bug["dir"] = str(corpus_dir / entry["dir"])
        bug["name"] = entry["dir"]
        bugs.append(bug)
    return manifest, bugs


def corpus_training_lines(corpus_dir):
    text = (Path(corpus_dir) / "training_corpus.txt").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip()]


def train_corpus_predictor(corpus_dir):
    """Reference predictor trained on the corpus's unbugged sources."""
    return train_reference(corpus_training_lines(corpus_dir))


def bug_repair_config(bug, **overrides):
    settings = dict(
        project_dir=bug["dir"],
        source_file=bug["file"],
        buggy_line=bug["buggy_line_index"],
        build_command=bug["build_command"],
        test_command=bug["test_command"],
    )
    settings.update(overrides)
    return RepairConfig(**settings)


def exact_match_found(report, bug):
    """Did any plausible replace-mode patch reproduce the ground-truth line
    token for token?"""
    fixed = [t.text for t in tokenize(bug["fixed_line"].strip())]
    for entry in report.plausible:
        if entry["inserted"] != "replace":
            continue
        if [t.text for t in tokenize(entry["rendered_line"])] == fixed:
            return True
    return False


def evaluate_corpus(corpus_dir, predictor=None, bug_filter=None,
                    clock=time.monotonic, **config_overrides):
    """Run repair over every bug and tabulate plausible / exact-match fixes.

    Per-bug errors are recorded and the run continues. Extra keyword
    arguments become RepairConfig overrides (beam_width, strategies, ...).
    """
    config_overrides.setdefault("per_patch_timeout", 30.0)
    config_overrides.setdefault("wall_clock_limit", 1800.0)
    _, bugs = load_corpus(corpus_dir)
    if bug_filter is not None:
        bugs = [bug for bug in bugs if bug_filter(bug)]
    if predictor is None:
        predictor = train_corpus_predictor(corpus_dir)
    rows = []
    for bug in bugs:
        row = {"name": bug["name"], "bug_class": bug["bug_class"],
               "plausible": False, "exact_match": False, "error": None}
        try:
            config = bug_repair_config(bug, **config_overrides)
            report = run_repair(config, predictor=predictor, clock=clock)
            row["plausible"] = report.plausible_found
            row["exact_match"] = exact_match_found(report, bug)
        except Exception as exc:  # keep evaluating the rest of the corpus
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)

    by_class = {}
    for row in rows:
        bucket = by_class.setdefault(
            row["bug_class"], {"bugs": 0, "plausible": 0, "exact_match": 0})
        bucket["bugs"] += 1
        bucket["plausible"] += int(row["plausible"])
        bucket["exact_match"] += int(row["exact_match"])
    return {
        "rows": rows,
        "totals": {
            "bugs": len(rows),
            "plausible": sum(int(r["plausible"]) for r in rows),
            "exact_match": sum(int(r["exact_match"]) for r in rows),
        },
        "by_class": by_class,
    }


ABLATION_SETS = (
    ("complete",),
    ("complete", "partial"),
    ("complete", "partial", "template"),
)


def ablation_metrics(corpus_dir, sets=ABLATION_SETS, predictor=None,
                     clock=time.monotonic, **config_overrides):
    """Cumulative strategy-set evaluation with marginal-add columns."""
    if predictor is None:
        predictor = train_corpus_predictor(corpus_dir)
    steps = []
    previous_exact = 0
    previous_plausible = 0
    for strategy_set in sets:
        metrics = evaluate_corpus(
            corpus_dir, predictor=predictor, clock=clock,
            strategies=tuple(strategy_set), **config_overrides)
        exact = metrics["totals"]["exact_match"]
        plausible = metrics["totals"]["plausible"]
        steps.append({
            "strategies": list(strategy_set),
            "exact_match": exact,
            "plausible": plausible,
            "exact_added": exact - previous_exact,
            "plausible_added": plausible - previous_plausible,
        })
        previous_exact, previous_plausible = exact, plausible
    return {"steps": steps}


def format_metrics(metrics):
    lines = ["class                 bugs  plausible  exact"]
    for bug_class in BUG_CLASSES:
        bucket = metrics["by_class"].get(bug_class)
        if not bucket:
            continue
        lines.append(
            f"{bug_class:<22}{bucket['bugs']:>4}{bucket['plausible']:>10}"
            f"{bucket['exact_match']:>8}")
    totals = metrics["totals"]
    lines.append(
        f"{'total':<22}{totals['bugs']:>4}{totals['plausible']:>10}"
        f"{totals['exact_match']:>8}")
    return "\n".join(lines)


def format_ablation(ablation):
    lines = ["strategy set                      exact  (+)  plausible  (+)"]
    for step in ablation["steps"]:
        name = "+".join(step["strategies"])
        lines.append(
            f"{name:<32}{step['exact_match']:>6} {step['exact_added']:>4}"
            f"{step['plausible']:>10} {step['plausible_added']:>4}")
    return "\n".join(lines)
