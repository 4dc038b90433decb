"""End-to-end pipeline wiring: configuration, fault-location ingestion,
per-location mask generation / beam fill / re-rank / aggregation / ranked
validation, and report persistence.

Reports are two artifacts written atomically into a report directory:
``records.jsonl`` (one structured record per patch, deterministic given
config, seed, and predictor state) and ``summary.json`` (digest, config
snapshot, plausible list, timing).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .context import CoreTooLarge, RepairTask, build_input
from .engine import aggregate, beam_fill, rerank
from .masks import ALL_STRATEGIES, expand_strategies, generate_mask_lines
from .predictor import (
    BackendUnavailable,
    ReferencePredictor,
    RemotePredictor,
    cached,
    train_reference,
)
from .tokens import TokenizerConfig, load_merges, tokenize
from .validation import (
    DEFAULT_FAILING_TEST_PATTERN,
    PLAUSIBLE,
    Sandbox,
    validate_ranked,
)

log = logging.getLogger(__name__)

CACHE_DIR_ENV = "CLOZEREPAIR_CACHE_DIR"

UNATTEMPTED = "unattempted"

STATUS_PLAUSIBLE_FOUND = "plausible_found"
STATUS_NO_PLAUSIBLE = "no_plausible"
STATUS_NO_LOCATIONS = "no_locations"


class ConfigError(ValueError):
    """The repair configuration is unusable."""


@dataclass(frozen=True)
class SuspiciousLocation:
    file: str
    line_index: int
    suspiciousness: float = 1.0

    def __post_init__(self):
        if self.line_index < 0:
            raise ConfigError("suspicious line indices are 0-based and non-negative")
        if not (0.0 <= self.suspiciousness <= 1.0):
            raise ConfigError("suspiciousness must lie in [0, 1]")


def read_suspicious_file(path, top_n=40):
    """Parse 'path<TAB>line<TAB>score' lines into ranked locations."""
    locations = []
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            raw = raw.rstrip("\n")
            if not raw.strip():
                continue
            try:
                file, line_index, score = raw.split("\t")
                locations.append(SuspiciousLocation(
                    file=file, line_index=int(line_index),
                    suspiciousness=float(score)))
            except ValueError as exc:
                raise ConfigError(f"bad suspicious-location line {raw!r}: {exc}")
    locations.sort(key=lambda loc: -loc.suspiciousness)
    return locations[:top_n]


_CONFIG_FIELDS = None  # populated after the dataclass is defined


@dataclass
class RepairConfig:
    project_dir: str = "."
    source_file: str = None
    buggy_line: int = None
    suspicious_file: str = None
    top_suspicious: int = 40
    build_command: object = None
    test_command: object = None
    beam_width: int = None  # defaults to 25 for one location, 5 for many
    max_patches: int = 5000
    wall_clock_limit: float = 5 * 3600.0
    per_patch_timeout: float = 300.0
    validate_mode: str = "all"  # all | first-plausible
    strategies: tuple = ("complete", "partial", "template")
    workers: int = 1
    well_formed_filter: bool = True
    mask_sentinel: str = "<mask>"
    max_sequence_tokens: int = 512
    tokenizer_mode: str = "reference"
    merges_file: str = None
    predictor_backend: str = "reference"  # reference | remote
    train_corpus: str = None
    predictor_state: str = None
    remote_endpoint: str = None
    cache_dir: str = None
    report_dir: str = None
    failing_test_pattern: str = DEFAULT_FAILING_TEST_PATTERN

    def __post_init__(self):
        self.strategies = tuple(self.strategies)
        if self.validate_mode not in ("all", "first-plausible"):
            raise ConfigError(f"validate_mode must be all or first-plausible")
        if self.predictor_backend not in ("reference", "remote"):
            raise ConfigError("predictor_backend must be reference or remote")
        if self.max_patches < 1:
            raise ConfigError("max_patches must be at least 1")

    @classmethod
    def from_dict(cls, data):
        data = _flatten_sections(dict(data))
        unknown = set(data) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc))

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding="utf-8") as handle:
                data = json.load(handle)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        return cls.from_dict(data)

    def snapshot(self):
        data = dataclasses.asdict(self)
        data["strategies"] = list(self.strategies)
        return data

    def tokenizer_config(self):
        if self.merges_file or self.tokenizer_mode == "subword":
            if not self.merges_file:
                raise ConfigError("subword mode needs a merges_file")
            return load_merges(
                self.merges_file, mask_sentinel=self.mask_sentinel,
                max_sequence_tokens=self.max_sequence_tokens)
        return TokenizerConfig(
            mode="reference", mask_sentinel=self.mask_sentinel,
            max_sequence_tokens=self.max_sequence_tokens)


_CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(RepairConfig))

# Config files may group tokenizer/predictor settings into sections; section
# keys map onto the flat fields (flat keys always work too).
_SECTION_KEYS = {
    "tokenizer": {
        "mode": "tokenizer_mode",
        "mask_sentinel": "mask_sentinel",
        "max_sequence_tokens": "max_sequence_tokens",
        "merges_file": "merges_file",
    },
    "predictor": {
        "backend": "predictor_backend",
        "train_corpus": "train_corpus",
        "state_file": "predictor_state",
        "endpoint": "remote_endpoint",
        "cache_dir": "cache_dir",
    },
}


def _flatten_sections(data):
    for section, mapping in _SECTION_KEYS.items():
        body = data.pop(section, None)
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, value in body.items():
            if key not in mapping:
                raise ConfigError(f"unknown key {key!r} in config section {section!r}")
            data[mapping[key]] = value
    return data


def build_predictor(config):
    """Predictor from config, wrapped with the persistent cache when a cache
    directory is configured (flag or CLOZEREPAIR_CACHE_DIR)."""
    if config.predictor_backend == "remote":
        if not config.remote_endpoint:
            raise ConfigError("remote backend needs remote_endpoint")
        backend = RemotePredictor(config.remote_endpoint)
    elif config.predictor_state:
        backend = ReferencePredictor.load(config.predictor_state)
    elif config.train_corpus:
        with open(config.train_corpus, encoding="utf-8") as handle:
            lines = [line.rstrip("\n") for line in handle]
        backend = train_reference(
            [line for line in lines if line.strip()], config.tokenizer_config())
    else:
        raise ConfigError(
            "reference backend needs predictor_state or train_corpus")
    cache_dir = config.cache_dir or os.environ.get(CACHE_DIR_ENV)
    if cache_dir:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        backend = cached(backend, Path(cache_dir) / "queries.jsonl")
    return backend


def resolve_locations(config):
    if config.suspicious_file:
        return read_suspicious_file(
            Path(config.project_dir) / config.suspicious_file
            if not Path(config.suspicious_file).is_absolute()
            else config.suspicious_file,
            top_n=config.top_suspicious)
    if config.source_file is not None and config.buggy_line is not None:
        return [SuspiciousLocation(file=config.source_file,
                                   line_index=config.buggy_line)]
    raise ConfigError("config names neither a buggy location nor a suspicious file")


@dataclass
class RepairReport:
    task_digest: str
    config_snapshot: dict
    records: list
    plausible: list
    timing: dict
    errors: list
    status: str

    def to_summary_dict(self):
        return {
            "task_digest": self.task_digest,
            "config": self.config_snapshot,
            "plausible": self.plausible,
            "timing": self.timing,
            "errors": self.errors,
            "status": self.status,
            "record_count": len(self.records),
        }

    def save(self, report_dir):
        report_dir = Path(report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(
            report_dir / "records.jsonl",
            "".join(json.dumps(record, sort_keys=True) + "\n"
                    for record in self.records))
        _atomic_write(
            report_dir / "summary.json",
            json.dumps(self.to_summary_dict(), sort_keys=True, indent=2) + "\n")
        return report_dir

    @classmethod
    def load(cls, report_dir):
        report_dir = Path(report_dir)
        records = []
        with open(report_dir / "records.jsonl", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    records.append(json.loads(line))
        with open(report_dir / "summary.json", encoding="utf-8") as handle:
            summary = json.load(handle)
        return cls(
            task_digest=summary["task_digest"],
            config_snapshot=summary["config"],
            records=records,
            plausible=summary["plausible"],
            timing=summary["timing"],
            errors=summary["errors"],
            status=summary["status"],
        )

    @property
    def plausible_found(self):
        return bool(self.plausible)


def _atomic_write(path, text):
    path = Path(path)
    scratch = path.with_name(path.name + ".tmp")
    scratch.write_text(text, encoding="utf-8")
    os.replace(scratch, path)


def _task_digest(config, sources):
    blob = json.dumps(
        {"config": config.snapshot(), "sources": sources}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _patch_record(location, patch, status, failing_tests=(), elapsed=None):
    return {
        "file": location.file,
        "line_index": location.line_index,
        "rendered_line": patch.rendered_line,
        "inserted": patch.inserted,
        "strategy": patch.strategy,
        "temp_joint_score": patch.temp_joint_score,
        "joint_score": patch.joint_score,
        "rank": patch.rank,
        "status": status,
        "failing_tests": list(failing_tests),
        "elapsed": elapsed,
    }


def run_repair(config, predictor=None, clock=time.monotonic):
    """Run the whole pipeline and return (and optionally persist) the report.

    Per location: mask generation, input building, beam fill, re-rank,
    aggregation to the per-location budget, then ranked validation within
    the remaining wall-clock budget. Module errors are surfaced with
    location context; a partial report is still written on timeout.
    """
    started = clock()
    tokenizer_config = config.tokenizer_config()

    locations = resolve_locations(config)
    if not locations:
        report = RepairReport(
            task_digest=_task_digest(config, {}),
            config_snapshot=config.snapshot(),
            records=[], plausible=[], timing={"total_elapsed": clock() - started},
            errors=["no suspicious locations supplied"],
            status=STATUS_NO_LOCATIONS)
        if config.report_dir:
            report.save(config.report_dir)
        return report

    if predictor is None:
        predictor = build_predictor(config)
    if config.predictor_backend == "remote" and isinstance(predictor, RemotePredictor):
        info = predictor.info()
        tokenizer_config = TokenizerConfig(
            mode=tokenizer_config.mode,
            mask_sentinel=info["mask_sentinel"],
            subword_merges=tokenizer_config.subword_merges,
            max_sequence_tokens=min(
                tokenizer_config.max_sequence_tokens, int(info["max_tokens"])),
        )

    beam_width = config.beam_width
    if beam_width is None:
        beam_width = 25 if len(locations) == 1 else 5
    per_location_budget = max(1, config.max_patches // len(locations))
    strategies = expand_strategies(config.strategies)
    deadline = started + config.wall_clock_limit

    records = []
    plausible_summary = []
    errors = []
    sources = {}

    for location in locations:
        source_path = Path(config.project_dir) / location.file
        try:
            source_text = source_path.read_text(encoding="utf-8")
        except OSError as exc:
            errors.append(f"{location.file}:{location.line_index}: unreadable: {exc}")
            continue
        sources[location.file] = hashlib.sha256(
            source_text.encode("utf-8")).hexdigest()
        source_lines = source_text.splitlines()
        try:
            task = RepairTask(
                source_lines=source_lines,
                buggy_line_index=location.line_index,
                build_command=config.build_command,
                test_command=config.test_command,
                beam_width=beam_width,
                max_patches=per_location_budget,
                wall_clock_limit=config.wall_clock_limit,
            )
        except ValueError as exc:
            errors.append(f"{location.file}:{location.line_index}: {exc}")
            continue

        buggy_tokens = tokenize(task.buggy_line, tokenizer_config)
        if not buggy_tokens:
            errors.append(
                f"{location.file}:{location.line_index}: blank buggy line")
            continue

        per_line_results = []
        generated = 0
        timed_out = False
        try:
            for mask_line in generate_mask_lines(
                    buggy_tokens, strategies, tokenizer_config.mask_sentinel):
                if generated >= per_location_budget:
                    break
                if clock() >= deadline:
                    timed_out = True
                    break
                try:
                    built = build_input(task, mask_line, tokenizer_config)
                except CoreTooLarge:
                    continue
                patches = beam_fill(
                    built, beam_width, predictor, tokenizer_config,
                    well_formed_filter=config.well_formed_filter)
                patches = patches[:per_location_budget - generated]
                generated += len(patches)
                if patches:
                    per_line_results.append(
                        rerank(patches, predictor, tokenizer_config))
        except BackendUnavailable as exc:
            _flush(config, records, plausible_summary,
                   errors + [f"{location.file}:{location.line_index}: {exc}"],
                   config.snapshot(), sources, started, clock)
            raise

        ranked = aggregate(per_line_results, per_location_budget)
        if timed_out:
            errors.append(
                f"{location.file}:{location.line_index}: wall clock exhausted "
                "during generation")

        sandbox = Sandbox(
            project_dir=config.project_dir,
            file_relpath=location.file,
            failing_test_pattern=config.failing_test_pattern)
        remaining = max(0.0, deadline - clock())
        outcomes = validate_ranked(
            task, ranked, sandbox,
            stop_at_first_plausible=(config.validate_mode == "first-plausible"),
            wall_clock_limit=remaining,
            workers=config.workers,
            per_patch_timeout=config.per_patch_timeout,
            clock=clock)

        for outcome in outcomes:
            records.append(_patch_record(
                location, outcome.patch, outcome.status,
                outcome.failing_tests, outcome.elapsed))
            if outcome.status == PLAUSIBLE:
                plausible_summary.append({
                    "file": location.file,
                    "line_index": location.line_index,
                    "rendered_line": outcome.patch.rendered_line,
                    "inserted": outcome.patch.inserted,
                    "strategy": outcome.patch.strategy,
                    "joint_score": outcome.patch.joint_score,
                    "rank": outcome.patch.rank,
                })
        for patch in ranked[len(outcomes):]:
            records.append(_patch_record(location, patch, UNATTEMPTED))

    status = STATUS_PLAUSIBLE_FOUND if plausible_summary else STATUS_NO_PLAUSIBLE
    report = RepairReport(
        task_digest=_task_digest(config, sources),
        config_snapshot=config.snapshot(),
        records=records,
        plausible=plausible_summary,
        timing={"total_elapsed": clock() - started},
        errors=errors,
        status=status)
    if config.report_dir:
        report.save(config.report_dir)
    return report


def _flush(config, records, plausible, errors, snapshot, sources, started, clock):
    """Best-effort partial report before surfacing a fatal error."""
    if not config.report_dir:
        return
    try:
        RepairReport(
            task_digest=_task_digest(config, sources),
            config_snapshot=snapshot,
            records=records,
            plausible=plausible,
            timing={"total_elapsed": clock() - started},
            errors=errors,
            status=STATUS_NO_PLAUSIBLE if not plausible else STATUS_PLAUSIBLE_FOUND,
        ).save(config.report_dir)
    except OSError:  # pragma: no cover
        log.exception("failed to flush partial report")
