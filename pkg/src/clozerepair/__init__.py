"""Cloze-style automated program repair.

Replace a suspicious source line with masked templates, fill the masks by
beam search against a pluggable masked-token predictor, re-rank completed
patches by leave-one-out likelihood, and validate them against the
project's build and test commands.
"""

__version__ = "0.1.0"

from .context import CoreTooLarge, PredictorInput, RepairTask, build_input, wrap_as_comment
from .corpus import evaluate_corpus, generate_bug_corpus
from .engine import CandidatePatch, aggregate, beam_fill, rerank
from .masks import LineSyntax, MaskLine, analyze_line, generate_mask_lines
from .orchestrator import (
    ConfigError,
    RepairConfig,
    RepairReport,
    SuspiciousLocation,
    run_repair,
)
from .predictor import (
    BackendUnavailable,
    CachedPredictor,
    EmptyVocabulary,
    PredictorQuery,
    ReferencePredictor,
    RemotePredictor,
    StoreCorrupt,
    TokenDistribution,
    cached,
    train_reference,
)
from .tokens import (
    EmptyCorpus,
    MaskStillPresent,
    Token,
    TokenizerConfig,
    detokenize,
    tokenize,
    train_subword,
)
from .validation import (
    Sandbox,
    SandboxSetupFailed,
    ValidationOutcome,
    apply_patch,
    validate,
    validate_ranked,
)
