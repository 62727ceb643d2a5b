"""Integral-equation solvers for the steady 2D radiative transfer equation."""

from .angular import ISOTROPIC_MODES, ModalSolution, ModeSet, select_modes
from .dense import assemble_aniso, assemble_iso, solve_dense
from .diagnostics import analyze
from .exceptions import (ConvergenceError, FactorizationError, RTEError, SingularSystemError,
                         UnsupportedBackendError)
from .fft import KrylovConfig, build_symbol, solve_fft
from .geometry import UNIT_SQUARE, Domain, Grid
from .kernel import KernelMatrix
from .medium import Medium, PhaseFunction, gaussian_bump_anisotropic, henyey_like_cosine
from .rsf import RSFSolver, solve_rsf

__version__ = "0.1.0"

__all__ = [
    "ISOTROPIC_MODES", "UNIT_SQUARE", "ConvergenceError", "Domain", "FactorizationError", "Grid",
    "KernelMatrix", "KrylovConfig", "Medium", "ModalSolution", "ModeSet", "PhaseFunction", "RSFSolver",
    "RTEError", "SingularSystemError", "UnsupportedBackendError", "analyze", "assemble_aniso",
    "assemble_iso", "build_symbol", "gaussian_bump_anisotropic", "henyey_like_cosine", "select_modes",
    "solve_dense", "solve_fft", "solve_rsf",
]
