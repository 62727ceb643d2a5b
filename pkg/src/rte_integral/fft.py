"""Fast solver for homogeneous media: circulant embedding of the
translation-invariant kernel plus Krylov iteration."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .angular import ISOTROPIC_MODES, ModalSolution, ModeSet, sigma_hat_table
from .exceptions import UnsupportedBackendError
from .geometry import Grid
from .kernel import DEFAULT_DIAG_QUAD, TWO_PI, DiagQuadrature, KernelMatrix
from .krylov import KrylovResult, gmres, minres
from .medium import DEFAULT_LINE_QUAD, LineQuadrature, Medium, PhaseFunction


@dataclass
class KrylovConfig:
    tol: float = 1e-8
    maxiter: int = 10_000
    method: str = "auto"  # "auto", "minres" or "gmres"
    restart: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.method not in ("auto", "minres", "gmres"):
            raise ValueError(f"unknown Krylov method {self.method!r}")
        if self.restart < 1 or self.maxiter < 1:
            raise ValueError("restart and maxiter must be >= 1")


@dataclass
class CirculantSymbol:
    """Transforms of the padded kernel ``Kt e^{i m theta}`` on a ``2n x 2n`` grid.

    ``hats[m]`` holds the transform for phase order ``m = k' - k`` (the
    real-input half spectrum in the isotropic case).  The
    sample at zero displacement is the diagonal cell integral, so applying
    the symbol reproduces the dense ``Kt`` matrix entrywise.
    """

    grid: Grid
    modes: ModeSet
    hats: dict
    weights: np.ndarray  # mu_s sigma_hat(k') per mode
    mu_s: float
    kernel: KernelMatrix = field(repr=False)

    @property
    def anisotropic(self) -> bool:
        return self.kernel.phase is not None

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def M(self) -> int:
        return self.modes.M

    @property
    def size(self) -> int:
        return self.grid.N * self.modes.M


def _offsets(n: int, h: float):
    j = np.arange(2 * n)
    off = np.where(j < n, j, j - 2 * n).astype(float)
    off[n] = np.nan  # never reached by a linear convolution of length-n data
    d1, d2 = np.meshgrid(off * h, off * h, indexing="xy")
    return d1, d2


def build_symbol(grid: Grid, medium: Medium, phase: PhaseFunction | None = None,
                 modes: ModeSet = ISOTROPIC_MODES, diag_quad: DiagQuadrature = DEFAULT_DIAG_QUAD,
                 line_quad: LineQuadrature = DEFAULT_LINE_QUAD) -> CirculantSymbol:
    """Precompute the padded-kernel transforms, one per phase order ``k' - k``."""
    if not medium.homogeneous:
        raise UnsupportedBackendError("the fft backend needs a homogeneous medium")
    if phase is not None and not phase.is_homogeneous:
        raise UnsupportedBackendError("the fft backend needs a spatially constant phase function")
    if modes.M > 1 and phase is None:
        raise ValueError("anisotropic mode sets need a phase function")
    km = KernelMatrix(grid, medium, phase, modes, "plain", line_quad, diag_quad)
    n, h = grid.n, grid.h
    d1, d2 = _offsets(n, h)
    r = np.hypot(d1, d2)
    valid = np.isfinite(r) & (r > 0)
    rr = np.where(valid, r, 1.0)
    base = np.where(valid, np.exp(-medium.mu_t_value * rr) / (TWO_PI * rr) * grid.volume, 0.0)
    theta = np.arctan2(d2, d1)
    hats = {}
    for m in modes.differences():
        if m == 0:
            kap = base.copy()
            kap[0, 0] = km.diag_values(0)[0].real
            hats[m] = sfft.rfft2(kap) if phase is None else sfft.fft2(kap)
        else:
            kap = base * np.exp(1j * m * np.where(valid, theta, 0.0))
            kap[0, 0] = km.diag_values(m)[0]
            hats[m] = sfft.fft2(kap)
    mu_s = float(medium.mu_s_value)
    if phase is None:
        weights = np.array([mu_s])
    else:
        sh = sigma_hat_table(phase, modes, grid.centers[:1])[:, 0]
        weights = mu_s * sh
    return CirculantSymbol(grid, modes, hats, weights, mu_s, km)


def _forward(x, n: int, real: bool):
    """Transform of ``x`` zero-padded to ``2n x 2n``.  The row transform runs
    over the ``n`` data rows only; the padding rows are never transformed."""
    X = sfft.rfft(x, 2 * n, axis=-1) if real else sfft.fft(x, 2 * n, axis=-1)
    return sfft.fft(X, 2 * n, axis=-2, overwrite_x=True)


def _inverse(X, n: int, real: bool):
    """Leading ``n x n`` corner of the inverse transform, pruned the same way.
    ``X`` is used as scratch space."""
    Y = sfft.ifft(X, axis=-2, overwrite_x=True)[..., :n, :]
    if real:
        return sfft.irfft(Y, 2 * n, axis=-1, overwrite_x=True)[..., :n]
    return sfft.ifft(Y, axis=-1, overwrite_x=True)[..., :n]


def apply_conv(symbol: CirculantSymbol, phi, plain: bool = False) -> np.ndarray:
    """Product with the dense ``Kt`` matrix (``plain=True``: with ``K = Kt W``).

    ``phi`` has length ``N`` (isotropic) or ``N M`` (mode-blocked).
    """
    phi = np.asarray(phi)
    n, N, M = symbol.n, symbol.grid.N, symbol.M
    if phi.shape != (N * M,):
        raise ValueError(f"expected a vector of length {N * M}, got shape {phi.shape}")
    blocks = phi.reshape(M, n, n)
    if plain:
        blocks = blocks * symbol.weights[:, None, None]
    if not symbol.anisotropic:
        hat0 = symbol.hats[0]
        if not np.iscomplexobj(blocks):
            X = _forward(blocks[0], n, True)
            X *= hat0
            return _inverse(X, n, True).ravel()
        # two real convolutions keep the half-spectrum symbol usable
        out = []
        for part in (blocks[0].real, blocks[0].imag):
            X = _forward(part, n, True)
            X *= hat0
            out.append(_inverse(X, n, True))
        return (out[0] + 1j * out[1]).ravel()
    spectra = _forward(blocks, n, False)
    acc = np.zeros((M, 2 * n, 2 * n), dtype=complex)
    modes = symbol.modes.modes
    for a, k in enumerate(modes):
        for b, kp in enumerate(modes):
            acc[a] += symbol.hats[kp - k] * spectra[b]
    return _inverse(acc, n, False).ravel()


def apply_system(symbol: CirculantSymbol, x, form: str) -> np.ndarray:
    """``A x`` for ``form`` ``"symmetric"`` (``x/mu_s - Kt x``) or ``"plain"`` (``x - K x``)."""
    if form == "symmetric":
        return x / symbol.mu_s - apply_conv(symbol, x)
    return x - apply_conv(symbol, x, plain=True)


@dataclass
class FFTSolution:
    u: np.ndarray
    iterations: int
    history: list
    residual: float
    modal: ModalSolution | None = None
    u_tilde: np.ndarray | None = None


def solve_fft(symbol: CirculantSymbol, medium: Medium, f, config: KrylovConfig | None = None) -> FFTSolution:
    """Solve the discrete system with the unpreconditioned Krylov method.

    Isotropic problems use the symmetric form ``(I/mu_s - Kt) u_t = Kt f``
    with MINRES and return ``u = u_t / mu_s``; problems with a phase
    function use ``(I - K) u = K g_hat`` with restarted GMRES.
    """
    config = config or KrylovConfig()
    if not medium.homogeneous:
        raise UnsupportedBackendError("the fft backend needs a homogeneous medium")
    f = np.asarray(f, dtype=float)
    N, M = symbol.grid.N, symbol.M
    if f.shape != (N,):
        raise ValueError(f"f must have length {N}")
    src = np.zeros(N * M, dtype=complex if symbol.anisotropic else float)
    a0 = symbol.modes.position(0)
    src[a0 * N:(a0 + 1) * N] = f
    rhs = apply_conv(symbol, src)
    if not np.any(rhs):
        u = np.zeros(N * M, dtype=rhs.dtype)
        return _package(symbol, u, KrylovResult(u, 0, [0.0]), None)
    if symbol.mu_s <= symbol.kernel.mu_s_floor:
        # no scattering: A = I
        return _package(symbol, rhs, KrylovResult(rhs, 0, [0.0]), None)
    if not symbol.anisotropic and config.method in ("auto", "minres"):
        res = minres(lambda x: apply_system(symbol, x, "symmetric"), rhs, config.tol, config.maxiter)
        return _package(symbol, res.x / symbol.mu_s, res, res.x)
    res = gmres(lambda x: apply_system(symbol, x, "plain"), rhs, config.tol, config.restart, config.maxiter)
    return _package(symbol, res.x, res, None)


def _package(symbol, u, res: KrylovResult, u_tilde) -> FFTSolution:
    modal = None
    if symbol.anisotropic:
        modal = ModalSolution.from_vector(symbol.grid, symbol.modes, u)
    return FFTSolution(u, res.iterations, list(res.history), res.residual, modal, u_tilde)


def write_history_csv(history, path) -> None:
    """Columns ``iteration, relative_residual``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "relative_residual"])
        for i, r in enumerate(history, start=1):
            w.writerow([i, repr(float(r))])
