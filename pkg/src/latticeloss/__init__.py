"""Delay-penalized transducer loss.

Log-space forward-backward over the (frames x tokens) alignment lattice
with analytic gradients; a per-frame delay penalty on the non-blank
log-probabilities that trades likelihood for earlier emission; a
FastEmit-style gradient-scaling baseline; a brute-force enumeration
oracle for validating all of it; MAD/MED latency metrics; and a CLI for
verification, lambda sweeps, and a toy streaming-training experiment.
"""

from ._backend import backend_name
from .lattice import (
    Lattice,
    LatticeFormatError,
    TokenizedUtterance,
    lattice_from_logits,
    log_softmax,
    read_lattice,
    write_lattice,
)
from .latency import (
    LatencyReport,
    NoDataError,
    TimedWord,
    format_timestamps,
    latency_report,
    mad,
    match_words,
    med,
    parse_timestamps,
)
from .loss import (
    AlignmentPath,
    LossResult,
    backward,
    forward,
    log_add,
    logit_grads,
    loss_and_grad,
    viterbi,
)
from .oracle import (
    EnumerationBudgetError,
    PathEnumeration,
    enumerate_paths,
    oracle_delay_regularized_objective,
    oracle_grad,
    oracle_loss,
    oracle_weights_and_davg,
    path_count,
)
from .penalty import (
    DEFAULT_LAMBDAS,
    PenaltyConfig,
    apply_penalty,
    delay_score,
    exact_augmented_grads,
    fastemit_loss_and_grad,
    path_score,
    penalized_loss_and_grad,
)
from .verify import run_verification

__version__ = "0.1.0"

__all__ = [
    "AlignmentPath",
    "DEFAULT_LAMBDAS",
    "EnumerationBudgetError",
    "Lattice",
    "LatticeFormatError",
    "LatencyReport",
    "LossResult",
    "NoDataError",
    "PathEnumeration",
    "PenaltyConfig",
    "TimedWord",
    "TokenizedUtterance",
    "apply_penalty",
    "backend_name",
    "backward",
    "delay_score",
    "enumerate_paths",
    "exact_augmented_grads",
    "fastemit_loss_and_grad",
    "format_timestamps",
    "forward",
    "latency_report",
    "lattice_from_logits",
    "log_add",
    "log_softmax",
    "logit_grads",
    "loss_and_grad",
    "mad",
    "match_words",
    "med",
    "oracle_delay_regularized_objective",
    "oracle_grad",
    "oracle_loss",
    "oracle_weights_and_davg",
    "parse_timestamps",
    "path_count",
    "path_score",
    "penalized_loss_and_grad",
    "read_lattice",
    "run_verification",
    "viterbi",
    "write_lattice",
]
