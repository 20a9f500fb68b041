"""Spectral solvers for wave equations with multipoint-in-time conditions.

``u_tt - Delta u + A u = F`` on a periodic box with ``A`` a Hermitian
positive-definite matrix acting on ``C^d``-valued fields and initial
conditions tied to interior times ``lambda_k``.
"""

from .errors import MultiwaveError
from .multipoint import LinearProblem, MultipointSpec, SourceSamples, solve_linear, verify_solution
from .nonlinear import Nonlinearity, PicardConfig, continue_solution, solve_nonlinear
from .operators import OperatorSpec, build_operator, build_sturm_liouville
from .spectral import Field, GridSpec, SpectralTrajectory

__version__ = "0.1.0"

__all__ = [
    "Field",
    "GridSpec",
    "LinearProblem",
    "MultipointSpec",
    "MultiwaveError",
    "Nonlinearity",
    "OperatorSpec",
    "PicardConfig",
    "SourceSamples",
    "SpectralTrajectory",
    "build_operator",
    "build_sturm_liouville",
    "continue_solution",
    "solve_linear",
    "solve_nonlinear",
    "verify_solution",
]
