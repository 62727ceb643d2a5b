"""Dense Nystrom assembly and direct solves; the reference for the fast backends."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .angular import ISOTROPIC_MODES, ModeSet
from .exceptions import SingularSystemError
from .geometry import SQRT2, Grid
from .kernel import DEFAULT_DIAG_QUAD, DiagQuadrature, KernelMatrix
from .medium import DEFAULT_LINE_QUAD, LineQuadrature, Medium, PhaseFunction

DENSE_ROW_CAP = 20_000


@dataclass
class DenseSystem:
    """Assembled system ``A u = rhs``.

    ``Kt`` is the (phase-carrying) ``Kt`` matrix, ``A`` the system matrix.
    For ``form == "symmetric"`` the unknown is ``mu_s u``.
    """

    kernel: KernelMatrix
    A: np.ndarray
    Kt: np.ndarray
    _factor: object = None

    @property
    def form(self) -> str:
        return self.kernel.form

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @property
    def K(self) -> np.ndarray:
        """The plain-form operator ``K = Kt W`` (with ``W = mu_s sigma_hat``)."""
        return self.Kt * self.kernel.weights[None, :]

    def index(self, cell: int, k: int = 0) -> int:
        return self.kernel.modes.position(k) * self.kernel.N + int(cell)

    def rhs(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        km = self.kernel
        if km.phase is None:
            return self.Kt @ f
        if np.min(km.mu_s) > km.mu_s_floor:
            return self.K @ km.source_vector(f)
        a0 = km.modes.position(0)
        return self.Kt[:, a0 * km.N:(a0 + 1) * km.N] @ f

    def factor(self):
        if self._factor is None:
            try:
                if self.form == "symmetric":
                    try:
                        self._factor = ("chol", sla.cho_factor(self.A, lower=True, check_finite=False))
                    except np.linalg.LinAlgError:
                        self._factor = ("lu", sla.lu_factor(self.A, check_finite=False))
                else:
                    with warnings.catch_warnings():
                        warnings.simplefilter("error", sla.LinAlgWarning)
                        self._factor = ("lu", sla.lu_factor(self.A, check_finite=False))
            except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
                raise SingularSystemError(f"dense factorisation failed: {exc}") from exc
        return self._factor

    def solve_matrix(self, b) -> np.ndarray:
        kind, fac = self.factor()
        if kind == "chol":
            return sla.cho_solve(fac, b, check_finite=False)
        return sla.lu_solve(fac, b, check_finite=False)


def _check_cap(size: int, cap: int) -> None:
    if size > cap:
        raise ValueError(f"dense system with {size} rows exceeds the cap of {cap}; use the fft or rsf backend")


def assemble_iso(grid: Grid, medium: Medium, diag_quad: DiagQuadrature = DEFAULT_DIAG_QUAD,
                 line_quad: LineQuadrature = DEFAULT_LINE_QUAD, form: str | None = None,
                 mu_s_floor: float = 1e-12, cap: int = DENSE_ROW_CAP) -> DenseSystem:
    """Isotropic system, symmetric form ``diag(1/mu_s) - Kt`` when ``mu_s`` is bounded below.

    Falls back (with a warning) to ``I - K`` when ``mu_s`` drops below
    ``mu_s_floor`` somewhere on the grid.
    """
    _check_cap(grid.N, cap)
    mu_s = medium.sample(grid.centers)[0]
    if form is None:
        form = "symmetric"
        if np.min(mu_s) < mu_s_floor:
            warnings.warn("mu_s has no positive lower bound on the grid; using the unsymmetrised form")
            form = "plain"
    km = KernelMatrix(grid, medium, None, ISOTROPIC_MODES, form, line_quad, diag_quad, mu_s_floor)
    Kt = km.ktilde_dense()
    if form == "symmetric":
        A = np.diag(1.0 / mu_s) - Kt
    else:
        A = np.eye(grid.N) - Kt * mu_s[None, :]
    return DenseSystem(km, A, Kt)


def assemble_aniso(grid: Grid, medium: Medium, phase: PhaseFunction, modes: ModeSet,
                   diag_quad: DiagQuadrature = DEFAULT_DIAG_QUAD,
                   line_quad: LineQuadrature = DEFAULT_LINE_QUAD,
                   mu_s_floor: float = 1e-12, cap: int = DENSE_ROW_CAP) -> DenseSystem:
    """Modal system ``(I - K) u = K g_hat`` over generalised points (mode-blocked)."""
    _check_cap(grid.N * modes.M, cap)
    km = KernelMatrix(grid, medium, phase, modes, "plain", line_quad, diag_quad, mu_s_floor)
    Kt = km.ktilde_dense()
    A = np.eye(km.size, dtype=complex) - Kt * km.weights.astype(complex)[None, :]
    return DenseSystem(km, A, Kt)


@dataclass
class DenseSolution:
    u: np.ndarray
    u_tilde: np.ndarray | None
    rhs: np.ndarray
    residual: float


def solve_dense(system: DenseSystem, f) -> DenseSolution:
    """Direct solve.  Returns ``u`` (density or modal vector) and, for the
    symmetric form, ``u_tilde = mu_s u`` as well."""
    b = system.rhs(f)
    x = system.solve_matrix(b)
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(system.A @ x - b) / nb) if nb > 0 else 0.0
    if system.form == "symmetric":
        return DenseSolution(x / system.kernel.mu_s, x, b, res)
    return DenseSolution(x, None, b, res)


def richardson(system: DenseSystem, f, tol: float = 1e-12, maxiter: int = 20_000):
    """Fixed-point iteration ``u <- K u + rhs`` on the plain form.

    Returns ``(u, ratios)`` where ``ratios`` are successive update-norm ratios
    in the max norm.
    """
    K = system.K
    if system.kernel.phase is None:
        b = system.Kt @ np.asarray(f, dtype=float)
    else:
        b = system.rhs(f)
    u = np.array(b)
    prev = None
    ratios = []
    for _ in range(maxiter):
        new = K @ u + b
        step = float(np.max(np.abs(new - u)))
        if prev is not None and prev > 0:
            ratios.append(step / prev)
        u = new
        prev = step
        if step <= tol * max(float(np.max(np.abs(u))), 1e-300):
            break
    return u, np.asarray(ratios)


def discrete_norm(u, p, volume: float) -> float:
    """Cell-volume weighted discrete ``L^p`` norm; ``u`` may be ``(M, N)`` modal data."""
    u = np.asarray(u)
    mag = np.sqrt(np.sum(np.abs(u) ** 2, axis=0)) if u.ndim == 2 else np.abs(u)
    if p == np.inf or p == "inf":
        return float(np.max(mag)) if mag.size else 0.0
    p = float(p)
    return float((volume * np.sum(mag ** p)) ** (1.0 / p))


@dataclass
class AprioriResult:
    p: float
    norm_u: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.norm_u <= self.bound

    @property
    def margin(self) -> float:
        return self.bound - self.norm_u


def apriori_bound_factor(mu_s_sup: float, tau: float = SQRT2) -> float:
    return tau * np.exp(tau * mu_s_sup)


def apriori_check(u, f, mu_s_sup: float, p, volume: float, tau: float = SQRT2) -> AprioriResult:
    """Check ``||u||_p <= tau exp(tau ||mu_s||_inf) ||f||_p``."""
    if p not in (1, 2, np.inf, "inf"):
        raise ValueError("p must be 1, 2 or inf")
    nu = discrete_norm(u, p, volume)
    nf = discrete_norm(f, p, volume)
    return AprioriResult(float(np.inf if p == "inf" else p), float(nu), float(apriori_bound_factor(mu_s_sup, tau) * nf))


def dump_triplets(matrix, path, drop_tol: float = 0.0) -> None:
    """Write ``row col value`` lines (``row col re im`` for complex)."""
    matrix = np.asarray(matrix)
    rows, cols = np.nonzero(np.abs(matrix) > drop_tol)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(rows, cols):
            v = matrix[i, j]
            if np.iscomplexobj(matrix):
                fh.write(f"{i} {j} {v.real:.17g} {v.imag:.17g}\n")
            else:
                fh.write(f"{i} {j} {v:.17g}\n")
