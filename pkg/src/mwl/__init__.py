"""Random walks perturbed on a finite membrane and their skew Brownian limits."""
from .errors import (
    BandTooSmall,
    DegenerateDenominator,
    DegenerateGamma,
    EmptySample,
    GridBeyondHorizon,
    InvalidPMF,
    JumpOverMembrane,
    ModelError,
    MwlError,
    NoConvergence,
    NonPositiveTime,
    NonZeroMean,
    ReducibleChain,
    SingularSystem,
    ZeroVariance,
)
from .integer_dist import IntegerPMF, StepLaw, truncate_tail, validate_step_law
from .lab import ConvergenceReport, ExperimentConfig, run_convergence
from .membrane import EmbeddedChain, gamma_exact, reentry_kernel, stationary
from .model import WalkModel, closed_class_check, is_irreducible
from .skewbm import SkewBM, density, inverse_cdf, sample_path, transition_cdf
from .stats import batch_means, dkw_bound, ks_distance
from .walk import ExcursionLedger, WalkPath, scaled_path, simulate, simulate_batch

__version__ = "0.1.0"

__all__ = [
    "BandTooSmall",
    "ConvergenceReport",
    "DegenerateDenominator",
    "DegenerateGamma",
    "EmbeddedChain",
    "EmptySample",
    "ExcursionLedger",
    "ExperimentConfig",
    "GridBeyondHorizon",
    "IntegerPMF",
    "InvalidPMF",
    "JumpOverMembrane",
    "ModelError",
    "MwlError",
    "NoConvergence",
    "NonPositiveTime",
    "NonZeroMean",
    "ReducibleChain",
    "SingularSystem",
    "SkewBM",
    "StepLaw",
    "WalkModel",
    "WalkPath",
    "ZeroVariance",
    "batch_means",
    "closed_class_check",
    "density",
    "dkw_bound",
    "gamma_exact",
    "inverse_cdf",
    "is_irreducible",
    "ks_distance",
    "reentry_kernel",
    "run_convergence",
    "sample_path",
    "scaled_path",
    "simulate",
    "simulate_batch",
    "stationary",
    "transition_cdf",
    "truncate_tail",
    "validate_step_law",
]
