"""Fredholm kernels of the integral formulation and their Nystrom entries.

Off-diagonal entries use the midpoint rule (kernel at cell centres times
the cell volume).  Diagonal cells integrate the weakly singular kernel:
the ``1/r`` part in closed form, the bounded remainder ``(E - 1)/r`` with a
tensor Gauss-Legendre rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .angular import ISOTROPIC_MODES, ModeSet, sigma_hat_table
from .geometry import Grid, angle_between
from .medium import DEFAULT_LINE_QUAD, LineQuadrature, Medium, PhaseFunction, optical_depth

TWO_PI = 2.0 * np.pi
LOG_1_SQRT2 = float(np.log1p(np.sqrt(2.0)))


@dataclass(frozen=True)
class DiagQuadrature:
    """Tensor rule for the smooth remainder on a diagonal cell."""

    q_diag: int = 15
    analytic_singular: bool = True

    def __post_init__(self):
        if self.q_diag < 1:
            raise ValueError("q_diag must be >= 1")


DEFAULT_DIAG_QUAD = DiagQuadrature()


def ktilde(medium: Medium, x, y, quad: LineQuadrature = DEFAULT_LINE_QUAD):
    """``E(x, y) / (2 pi |x - y|)``; undefined for ``x == y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("ktilde is singular at x == y; use diag_cell_value")
    out = np.exp(-optical_depth(medium, quad, x, y)) / (TWO_PI * r)
    return out if np.ndim(out) else float(out)


def kiso(medium: Medium, x, y, quad: LineQuadrature = DEFAULT_LINE_QUAD):
    """``mu_s(y) * ktilde(x, y)``."""
    out = medium.sample(y)[0] * ktilde(medium, x, y, quad)
    return out if np.ndim(out) else float(out)


def ktilde_aniso(medium: Medium, x, k: int, y, kp: int, quad: LineQuadrature = DEFAULT_LINE_QUAD):
    """``ktilde(x, y) e^{i (k' - k) theta}`` with ``theta`` the polar angle of ``x - y``."""
    theta = angle_between(x, y)
    out = ktilde(medium, x, y, quad) * np.exp(1j * (kp - k) * theta)
    return out if np.ndim(out) else complex(out)


def kaniso(medium: Medium, phase: PhaseFunction, modes: ModeSet, x, k: int, y, kp: int,
           quad: LineQuadrature = DEFAULT_LINE_QUAD):
    """``mu_s(y) sigma_hat(y, k') ktilde(x, y) e^{i (k' - k) theta}``."""
    if k not in modes or kp not in modes:
        raise ValueError(f"modes ({k}, {kp}) not both in {modes.modes}")
    w = medium.sample(y)[0] * phase.hat(np.asarray(y, dtype=float), kp)
    out = w * ktilde_aniso(medium, x, k, y, kp, quad)
    return out if np.ndim(out) else complex(out)


# ---------------------------------------------------------------------------
# diagonal cells


def singular_cell_integral(h: float, m: int = 0) -> float:
    """``int_cell e^{i m theta} / (2 pi r) dy`` over a square of side ``h`` about its centre.

    In polar coordinates this is ``(1/2pi) int e^{i m theta} R(theta) dtheta``
    with ``R`` the distance to the cell boundary; it vanishes unless
    ``m`` is a multiple of 4 by the square's rotational symmetry.
    """
    if m == 0:
        return 4.0 * h * LOG_1_SQRT2 / TWO_PI
    if m % 4:
        return 0.0
    t, w = np.polynomial.legendre.leggauss(64)
    phi = (t + 1.0) * np.pi / 8.0
    val = np.sum(w * np.cos(m * phi) / np.cos(phi)) * np.pi / 8.0
    return float(8.0 * (h / 2.0) * val / TWO_PI)


def _remainder_rule(q: int):
    t, w = np.polynomial.legendre.leggauss(q)
    t1, t2 = np.meshgrid(t, t, indexing="xy")
    w12 = np.outer(w, w).ravel()
    return np.column_stack([t1.ravel(), t2.ravel()]), w12


def diag_cell_value(medium: Medium, centers, h: float, m: int = 0,
                    diag_quad: DiagQuadrature = DEFAULT_DIAG_QUAD,
                    line_quad: LineQuadrature = DEFAULT_LINE_QUAD) -> np.ndarray | complex:
    """``int_cell ktilde(x_i, y) e^{i m theta(x_i - y)} dy`` for cells centred at ``centers``.

    Real for ``m = 0``.  The remainder integrand ``(E - 1)/r`` is filled at
    ``y = x_i`` by its direction average, ``-mu_t(x_i)`` for ``m = 0`` and
    zero otherwise.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    sing = singular_cell_integral(h, m) if diag_quad.analytic_singular else 0.0
    nodes, w = _remainder_rule(diag_quad.q_diag)
    off = 0.5 * h * nodes
    r = np.linalg.norm(off, axis=-1)
    center = r == 0.0
    rs = np.where(center, 1.0, r)
    # x - y = -off
    phase = np.exp(1j * m * np.arctan2(-off[:, 1], -off[:, 0])) if m else 1.0
    y = centers[:, None, :] + off[None, :, :]
    x = np.broadcast_to(centers[:, None, :], y.shape)
    tau = optical_depth(medium, line_quad, x, y)
    rem = np.expm1(-tau) / rs
    if np.any(center):
        fill = -medium.sample(centers)[1] if m == 0 else np.zeros(len(centers))
        rem[:, center] = fill[:, None]
    rem = rem * phase
    if not diag_quad.analytic_singular:
        rem = rem + np.where(center, 0.0, 1.0 / rs) * phase
    val = sing + (rem @ w) * (0.25 * h * h) / TWO_PI
    if m == 0:
        val = val.real
    return val if len(val) > 1 else val[0]


# ---------------------------------------------------------------------------
# system matrix entries


@dataclass
class KernelMatrix:
    """Entry generator for the discretised system.

    Generalised points are ``(cell, mode)`` pairs, mode-blocked: row
    ``a * N + i`` is cell ``i`` at mode ``modes[a]``.

    ``form="symmetric"`` (isotropic only) is ``A = diag(1/mu_s) - Kt``;
    ``form="plain"`` is ``A = I - K`` with ``K = Kt W``, where ``W`` holds
    ``mu_s(x_j) sigma_hat(x_j, k')`` and ``Kt`` carries the phase
    ``e^{i(k'-k) theta}``.
    """

    grid: Grid
    medium: Medium
    phase: PhaseFunction | None = None
    modes: ModeSet = ISOTROPIC_MODES
    form: str = "plain"
    line_quad: LineQuadrature = DEFAULT_LINE_QUAD
    diag_quad: DiagQuadrature = DEFAULT_DIAG_QUAD
    mu_s_floor: float = 1e-12
    _diag_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.form not in ("symmetric", "plain"):
            raise ValueError(f"unknown form {self.form!r}")
        if self.form == "symmetric" and self.modes.M != 1:
            raise ValueError("the symmetric form is only defined for the isotropic problem")
        if self.phase is None:
            if self.modes.M != 1:
                raise ValueError("anisotropic mode sets need a phase function")

    # -- layout -----------------------------------------------------------
    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def M(self) -> int:
        return self.modes.M

    @property
    def size(self) -> int:
        return self.N * self.M

    @property
    def is_complex(self) -> bool:
        return self.phase is not None

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    @cached_property
    def cell(self) -> np.ndarray:
        return np.tile(np.arange(self.N), self.M)

    @cached_property
    def mode(self) -> np.ndarray:
        return np.repeat(np.asarray(self.modes.modes), self.N)

    @cached_property
    def coords(self) -> np.ndarray:
        return self.grid.centers[self.cell]

    @cached_property
    def mu_s(self) -> np.ndarray:
        return self.medium.sample(self.grid.centers)[0]

    @cached_property
    def weights(self) -> np.ndarray:
        """``mu_s sigma_hat`` per generalised point (plain form)."""
        if self.phase is None:
            return self.mu_s[self.cell].astype(self.dtype)
        sh = sigma_hat_table(self.phase, self.modes, self.grid.centers)
        return (sh * self.mu_s[None, :]).ravel()

    def diag_values(self, m: int = 0) -> np.ndarray:
        """Per-cell diagonal ``Kt`` integral (cell volume included) for phase order ``m``."""
        if m not in self._diag_cache:
            h = self.grid.h
            if self.medium.homogeneous:
                v = diag_cell_value(self.medium, self.grid.centers[:1], h, m, self.diag_quad, self.line_quad)
                vals = np.full(self.N, v)
            else:
                vals = np.atleast_1d(diag_cell_value(self.medium, self.grid.centers, h, m,
                                                     self.diag_quad, self.line_quad))
            self._diag_cache[m] = vals
        return self._diag_cache[m]

    # -- kernels ----------------------------------------------------------
    def ktilde_cells(self, ci, cj) -> np.ndarray:
        """``Kt`` between cells (volume-scaled), diagonal cells at ``m = 0``."""
        ci = np.asarray(ci)
        cj = np.asarray(cj)
        X = self.grid.centers[ci]
        Y = self.grid.centers[cj]
        return self._ktilde_points(X, Y, ci[:, None] == cj[None, :], ci)

    def _ktilde_points(self, X, Y, same=None, ci=None, m_same=0) -> np.ndarray:
        d = X[:, None, :] - Y[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=-1))
        if same is not None and same.any():
            r = np.where(same, 1.0, r)
        tau = optical_depth(self.medium, self.line_quad, X[:, None, :], Y[None, :, :])
        K = np.exp(-tau) / (TWO_PI * r) * self.grid.volume
        if same is not None and same.any():
            rows, cols = np.nonzero(same)
            K[rows, cols] = self.diag_values(m_same)[ci[rows]].real
        return K

    def ktilde_block(self, I, J) -> np.ndarray:
        """``Kt`` entries (with phase) between generalised points ``I`` and ``J``."""
        I = np.asarray(I)
        J = np.asarray(J)
        ci, cj = self.cell[I], self.cell[J]
        ui, inv_i = np.unique(ci, return_inverse=True)
        uj, inv_j = np.unique(cj, return_inverse=True)
        same_u = ui[:, None] == uj[None, :]
        Xu = self.grid.centers[ui]
        Yu = self.grid.centers[uj]
        Ku = self._ktilde_points(Xu, Yu, same_u, ui)
        K = Ku[np.ix_(inv_i, inv_j)]
        if self.phase is None:
            return K
        mdiff = self.mode[J][None, :] - self.mode[I][:, None]
        d = Xu[:, None, :] - Yu[None, :, :]
        theta_u = np.arctan2(d[..., 1], d[..., 0])
        theta = theta_u[np.ix_(inv_i, inv_j)]
        out = K * np.exp(1j * mdiff * theta)
        same = same_u[np.ix_(inv_i, inv_j)]
        if same.any():
            rows, cols = np.nonzero(same)
            md = mdiff[rows, cols]
            vals = np.empty(len(rows), dtype=complex)
            for m in np.unique(md):
                sel = md == m
                vals[sel] = self.diag_values(int(m))[ci[rows[sel]]]
            out[rows, cols] = vals
        return out

    def block(self, I, J) -> np.ndarray:
        """System matrix entries ``A[I, J]``."""
        I = np.asarray(I)
        J = np.asarray(J)
        Kt = self.ktilde_block(I, J)
        eye = (I[:, None] == J[None, :])
        if self.form == "symmetric":
            A = -Kt
            rows, cols = np.nonzero(eye)
            A[rows, cols] += 1.0 / self.mu_s[self.cell[I[rows]]]
            return A
        A = -Kt * self.weights[J][None, :]
        A[eye] += 1.0
        return A

    def proxy_block(self, I, P, proxy_modes=None, transpose: bool = False) -> np.ndarray:
        """Interactions between generalised points ``I`` and off-grid locations ``P``.

        Without ``transpose`` the result is ``A[proxy, I]`` (rows are proxy
        points at every mode); with it, ``A[I, proxy]^T``.  Proxy points never
        coincide with grid cells, so no diagonal terms arise.
        """
        I = np.asarray(I)
        P = np.asarray(P, dtype=float)
        X = self.coords[I]
        if transpose:
            K = self._ktilde_points(X, P)
        else:
            K = self._ktilde_points(P, X)
        if self.phase is None:
            if self.form == "symmetric":
                return -(K.T if transpose else K)
            if transpose:
                return -(K * self.medium.sample(P)[0][None, :]).T
            return -K * self.weights[I][None, :]
        modes = np.asarray(self.modes.modes if proxy_modes is None else proxy_modes)
        if transpose:
            d = X[:, None, :] - P[None, :, :]
            theta = np.arctan2(d[..., 1], d[..., 0])
            # entries A[(i,k), (p,k')] = -Kt(x_i, p) e^{i(k'-k) theta} w(p, k')
            sh = sigma_hat_table(self.phase, self.modes, P) * self.medium.sample(P)[0][None, :]
            out = []
            for a, kp in enumerate(modes):
                ph = np.exp(1j * (kp - self.mode[I])[:, None] * theta)
                out.append((-K * ph * sh[a][None, :]).T)
            return np.concatenate(out, axis=0)
        d = P[:, None, :] - X[None, :, :]
        theta = np.arctan2(d[..., 1], d[..., 0])
        out = []
        for k in modes:
            ph = np.exp(1j * (self.mode[I] - k)[None, :] * theta)
            out.append(-K * ph * self.weights[I][None, :])
        return np.concatenate(out, axis=0)

    def dense(self) -> np.ndarray:
        idx = np.arange(self.size)
        return self.block(idx, idx)

    def ktilde_dense(self) -> np.ndarray:
        idx = np.arange(self.size)
        return self.ktilde_block(idx, idx)

    def source_vector(self, f) -> np.ndarray:
        """``g_hat``: ``f_j / mu_s(x_j)`` on mode 0, zero elsewhere (plain form)."""
        g = np.zeros(self.size, dtype=self.dtype)
        a0 = self.modes.position(0)
        g[a0 * self.N:(a0 + 1) * self.N] = np.asarray(f, dtype=float) / self.mu_s
        return g
