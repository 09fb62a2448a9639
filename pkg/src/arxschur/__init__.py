"""Strong controllability of ARX_d(p, q) models via the Schur complement,
adaptive tracking under LS / WLS estimation, and Monte-Carlo checks of the
associated limit theorems."""

from .errors import ArxError
from .estim import EstimatorState, WeightPolicy
from .kernels import BACKEND
from .limit import LimitMatrices, build_lambda, schur_oracle
from .loop import NoiseGen, RefTrajectory, RunRecord, run_closed_loop
from .mc import McSummary, run_montecarlo
from .model import ArxModel, check_causality, check_strong_controllability, load_model, demo_model

__all__ = [
    "ArxError", "ArxModel", "BACKEND", "EstimatorState", "LimitMatrices", "McSummary",
    "NoiseGen", "RefTrajectory", "RunRecord", "WeightPolicy", "build_lambda",
    "check_causality", "check_strong_controllability", "load_model", "run_closed_loop",
    "run_montecarlo", "schur_oracle", "demo_model",
]
__version__ = "0.1.0"
