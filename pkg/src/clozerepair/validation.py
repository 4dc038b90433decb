"""Patch application and sandboxed build-and-test validation.

Every validation runs against a fresh copy of the project tree, so the
original tree is never touched. A patch is plausible when the build
command and the test command both exit zero; failing test names are
scraped from the test output with a configurable pattern.
"""

from __future__ import annotations

import hashlib
import logging
import re
import shutil
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

COMPILE_ERROR = "compile_error"
TEST_FAILURE = "test_failure"
PLAUSIBLE = "plausible"
TIMEOUT = "timeout"

DEFAULT_FAILING_TEST_PATTERN = r"^FAIL(?:ED)?:?\s+(\S+)"
DEFAULT_PER_PATCH_TIMEOUT = 300.0


class SandboxSetupFailed(RuntimeError):
    """The isolated project copy could not be created."""


@dataclass(frozen=True)
class Sandbox:
    """Where the project lives and which file the patches target."""

    project_dir: Path
    file_relpath: str
    workdir: Path = None
    failing_test_pattern: str = DEFAULT_FAILING_TEST_PATTERN

    def __post_init__(self):
        object.__setattr__(self, "project_dir", Path(self.project_dir))
        if self.workdir is not None:
            object.__setattr__(self, "workdir", Path(self.workdir))


@dataclass(frozen=True)
class ValidationOutcome:
    status: str
    patch: object
    failing_tests: tuple
    tool_output_digest: str
    elapsed: float
    patched_file_digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "failing_tests", tuple(self.failing_tests))
        if (self.status == TEST_FAILURE) != bool(self.failing_tests):
            raise ValueError("failing_tests must be nonempty exactly for test failures")


def _leading_whitespace(line):
    return line[:len(line) - len(line.lstrip(" \t"))]


def apply_patch(task, patch):
    """Patched source text: replace or insert the rendered line, re-indented
    with the original buggy line's leading whitespace; all other lines are
    untouched."""
    lines = list(task.source_lines)
    indent = _leading_whitespace(lines[task.buggy_line_index])
    new_line = indent + patch.rendered_line
    if patch.inserted == "replace":
        lines[task.buggy_line_index] = new_line
    elif patch.inserted == "before":
        lines.insert(task.buggy_line_index, new_line)
    elif patch.inserted == "after":
        lines.insert(task.buggy_line_index + 1, new_line)
    else:
        raise ValueError(f"unknown insertion mode: {patch.inserted!r}")
    return "\n".join(lines) + "\n"


def _run_command(command, cwd, timeout):
    if isinstance(command, str):
        return subprocess.run(command, shell=True, cwd=cwd, timeout=timeout,
                              capture_output=True, text=True)
    return subprocess.run(list(command), cwd=cwd, timeout=timeout,
                          capture_output=True, text=True)


def _parse_failing_tests(output, pattern):
    names = re.findall(pattern, output, flags=re.MULTILINE)
    unique = list(dict.fromkeys(names))
    return unique or ["(unparsed test failure)"]


def validate(task, patch, sandbox, per_patch_timeout=DEFAULT_PER_PATCH_TIMEOUT,
             clock=time.monotonic):
    """Apply one patch in an isolated project copy, build, test, classify."""
    start = clock()
    patched_text = apply_patch(task, patch)
    patched_digest = hashlib.sha256(patched_text.encode("utf-8")).hexdigest()
    if not sandbox.project_dir.is_dir():
        raise SandboxSetupFailed(f"project dir missing: {sandbox.project_dir}")
    scratch = tempfile.mkdtemp(prefix="clozerepair-", dir=sandbox.workdir)
    outputs = []

    def outcome(status, failing=()):
        blob = "\n".join(outputs).encode("utf-8")
        return ValidationOutcome(
            status=status, patch=patch, failing_tests=failing,
            tool_output_digest=hashlib.sha256(blob).hexdigest(),
            elapsed=clock() - start, patched_file_digest=patched_digest)

    try:
        tree = Path(scratch) / "project"
        try:
            shutil.copytree(sandbox.project_dir, tree, symlinks=True)
        except OSError as exc:
            raise SandboxSetupFailed(str(exc)) from exc
        target = tree / sandbox.file_relpath
        target.write_text(patched_text, encoding="utf-8")
        if hashlib.sha256(target.read_bytes()).hexdigest() != patched_digest:
            raise SandboxSetupFailed("patched file digest mismatch after write")

        try:
            build = _run_command(task.build_command, tree, per_patch_timeout)
            outputs.append(build.stdout)
            outputs.append(build.stderr)
            if build.returncode != 0:
                return outcome(COMPILE_ERROR)
            remaining = max(0.01, per_patch_timeout - (clock() - start))
            test = _run_command(task.test_command, tree, remaining)
            outputs.append(test.stdout)
            outputs.append(test.stderr)
            if test.returncode != 0:
                failing = _parse_failing_tests(
                    test.stdout + "\n" + test.stderr, sandbox.failing_test_pattern)
                return outcome(TEST_FAILURE, failing)
            return outcome(PLAUSIBLE)
        except subprocess.TimeoutExpired:
            return outcome(TIMEOUT)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def validate_ranked(task, patches, sandbox, stop_at_first_plausible=False,
                    wall_clock_limit=None, workers=1,
                    per_patch_timeout=DEFAULT_PER_PATCH_TIMEOUT,
                    clock=time.monotonic):
    """Validate patches in rank order, honoring the wall-clock budget.

    Stops early at the budget or (when configured) after the first
    plausible patch; the returned outcomes cover exactly the validated
    prefix, in rank order.
    """
    limit = wall_clock_limit if wall_clock_limit is not None else task.wall_clock_limit
    patches = list(patches)
    start = clock()
    outcomes = []
    if workers < 1:
        raise ValueError("workers must be at least 1")
    index = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while index < len(patches):
            if clock() - start >= limit:
                break
            batch = patches[index:index + workers]
            futures = [
                pool.submit(validate, task, patch, sandbox,
                            per_patch_timeout=per_patch_timeout, clock=clock)
                for patch in batch
            ]
            stop = False
            for future in futures:
                result = future.result()
                outcomes.append(result)
                if stop_at_first_plausible and result.status == PLAUSIBLE:
                    stop = True
                    break
            if stop:
                break
            index += len(batch)
    return outcomes
