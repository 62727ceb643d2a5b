"""Fast direct solver for general (inhomogeneous) media."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..angular import ISOTROPIC_MODES, ModalSolution, ModeSet
from ..geometry import Grid
from ..kernel import DEFAULT_DIAG_QUAD, DiagQuadrature, KernelMatrix
from ..medium import DEFAULT_LINE_QUAD, LineQuadrature, Medium, PhaseFunction
from .factor import DEFAULT_PROXY, LevelStats, ProxyRule, SkelFactorization, factorize
from .id import interpolative_decomposition
from .tree import Box, ClusterTree, build_tree

__all__ = [
    "Box", "ClusterTree", "LevelStats", "ProxyRule", "RSFSolution", "RSFSolver", "SkelFactorization",
    "build_tree", "factorize", "interpolative_decomposition", "solve_rsf",
]


@dataclass
class RSFSolution:
    u: np.ndarray
    modal: ModalSolution | None = None
    u_tilde: np.ndarray | None = None


class RSFSolver:
    """Factor once, then solve for any number of sources.

    Isotropic problems (no phase function) with ``mu_s`` bounded below use
    the symmetric form ``(I/mu_s - Kt) u_t = Kt f`` on the symmetric
    elimination path.  Anything with a phase function, even with the single
    mode 0, uses ``(I - K) u = rhs`` on the general path.
    """

    def __init__(self, grid: Grid, medium: Medium, eps: float, phase: PhaseFunction | None = None,
                 modes: ModeSet = ISOTROPIC_MODES, leaf_capacity: int = 64, proxy: ProxyRule = DEFAULT_PROXY,
                 diag_quad: DiagQuadrature = DEFAULT_DIAG_QUAD, line_quad: LineQuadrature = DEFAULT_LINE_QUAD,
                 mu_s_floor: float = 1e-12, form: str | None = None):
        mu_s = medium.sample(grid.centers)[0]
        if form is None:
            form = "symmetric" if phase is None else "plain"
            if form == "symmetric" and np.min(mu_s) < mu_s_floor:
                warnings.warn("mu_s has no positive lower bound on the grid; using the unsymmetrised form")
                form = "plain"
        self.grid = grid
        self.modes = modes
        self.kernel = KernelMatrix(grid, medium, phase, modes, form, line_quad, diag_quad, mu_s_floor)
        self.factorization: SkelFactorization = factorize(self.kernel, eps, leaf_capacity=leaf_capacity,
                                                          proxy=proxy)

    @property
    def form(self) -> str:
        return self.kernel.form

    def rhs(self, f) -> np.ndarray:
        """Right-hand side, using ``Kt x = x/mu_s - A x`` (or ``K g = g - A g``)
        so no extra kernel evaluations are needed."""
        km = self.kernel
        f = np.asarray(f, dtype=float)
        if f.shape != (km.N,):
            raise ValueError(f"f must have length {km.N}")
        F = self.factorization
        if km.form == "symmetric":
            return f / km.mu_s - F.apply(f)
        if np.min(km.mu_s) > km.mu_s_floor:
            g = km.source_vector(f)
            return g - F.apply(g)
        # no usable 1/mu_s: evaluate Kt f directly, a row chunk at a time
        a0 = km.modes.position(0)
        cols = np.arange(a0 * km.N, (a0 + 1) * km.N)
        out = np.empty(km.size, dtype=km.dtype)
        for start in range(0, km.size, 512):
            rows = np.arange(start, min(start + 512, km.size))
            out[rows] = km.ktilde_block(rows, cols) @ f
        return out

    def solve(self, f) -> RSFSolution:
        b = self.rhs(f)
        x = self.factorization.solve(b)
        if self.form == "symmetric":
            return RSFSolution(x / self.kernel.mu_s, None, x)
        modal = ModalSolution.from_vector(self.grid, self.modes, x) if self.kernel.phase is not None else None
        return RSFSolution(x, modal, None)


def solve_rsf(grid: Grid, medium: Medium, f, eps: float, phase: PhaseFunction | None = None,
              modes: ModeSet = ISOTROPIC_MODES, **kwargs) -> RSFSolution:
    return RSFSolver(grid, medium, eps, phase, modes, **kwargs).solve(f)
