"""Angular model reduction: Fourier modes of the phase function, mode
truncation, and reconstruction of the scattering term and photon flux."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Grid, exit_distance
from .medium import (DEFAULT_LINE_QUAD, LineQuadrature, Medium, PhaseFunction,
                     _trapezoid_coefficient, optical_factor)

DEFAULT_MODE_THRESHOLD = 1e-10
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class ModeSet:
    """Sorted set of retained angular frequencies; always contains 0."""

    modes: tuple[int, ...]

    def __init__(self, modes: Iterable[int]):
        m = [int(k) for k in modes]
        if len(set(m)) != len(m):
            raise ValueError(f"duplicate modes in {m}")
        if 0 not in m:
            raise ValueError("the mode set must contain 0")
        object.__setattr__(self, "modes", tuple(sorted(m)))

    @classmethod
    def symmetric(cls, K: int) -> "ModeSet":
        return cls(range(-K, K + 1))

    @property
    def M(self) -> int:
        return len(self.modes)

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __contains__(self, k) -> bool:
        return int(k) in self.modes

    def position(self, k: int) -> int:
        try:
            return self.modes.index(int(k))
        except ValueError:
            raise ValueError(f"mode {k} is not in {self.modes}") from None

    @property
    def is_symmetric(self) -> bool:
        return all(-k in self.modes for k in self.modes)

    def differences(self) -> list[int]:
        """All values of ``k' - k`` over pairs of retained modes."""
        return sorted({kp - k for k in self.modes for kp in self.modes})


ISOTROPIC_MODES = ModeSet([0])


def fourier_sigma(phase: PhaseFunction, x, k: int, n_theta: int | None = None) -> np.ndarray | complex:
    """``sigma_hat(x, k) = (1/2pi) int sigma(x, theta) e^{-ik theta} dtheta``.

    Analytic phase functions use the trapezoid rule on ``n_theta`` uniform
    angles (at least ``4|k| + 4``).
    """
    x = np.asarray(x, dtype=float)
    if phase.sigma is not None:
        n = max(n_theta or phase.n_theta, 4 * abs(int(k)) + 4)
        out = _trapezoid_coefficient(phase.sigma, x, int(k), n)
    else:
        out = phase.hat(x, k)
    return out if np.ndim(out) else complex(out)


def select_modes(phase: PhaseFunction, points, threshold: float = DEFAULT_MODE_THRESHOLD,
                 max_bandwidth: int | None = None) -> ModeSet:
    """Modes whose coefficient exceeds ``threshold`` in sup norm over ``points``, plus 0."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    points = np.asarray(points, dtype=float)
    if phase.coefficients is not None:
        candidates = phase.known_modes
    else:
        K = phase.bandwidth if max_bandwidth is None else max_bandwidth
        candidates = range(-K, K + 1)
    keep = {0}
    for k in candidates:
        if max_bandwidth is not None and abs(k) > max_bandwidth:
            continue
        if np.max(np.abs(fourier_sigma(phase, points, k))) > threshold:
            keep.add(int(k))
    return ModeSet(keep)


def sigma_hat_table(phase: PhaseFunction, modes: ModeSet, points) -> np.ndarray:
    """``(M, P)`` array of ``sigma_hat`` at each mode and point."""
    points = np.asarray(points, dtype=float)
    return np.stack([np.broadcast_to(fourier_sigma(phase, points, k), points.shape[:-1])
                     for k in modes]).astype(complex)


@dataclass
class ModalSolution:
    """Modal flux ``Phi_hat(x_i, k)`` stored as an ``(M, N)`` complex array."""

    grid: Grid
    modes: ModeSet
    values: np.ndarray

    @classmethod
    def from_vector(cls, grid: Grid, modes: ModeSet, u) -> "ModalSolution":
        u = np.asarray(u)
        return cls(grid, modes, u.reshape(modes.M, grid.N).astype(complex))

    def mode(self, k: int) -> np.ndarray:
        return self.values[self.modes.position(k)]

    @property
    def density(self) -> np.ndarray:
        """Mean local density (the zeroth mode), real part."""
        return self.mode(0).real

    def at(self, x, interpolation: str = "nearest") -> np.ndarray:
        """Modal values at arbitrary points, shape ``(M, ...)``."""
        x = np.asarray(x, dtype=float)
        if interpolation == "nearest":
            return self.values[:, self.grid.nearest_cell(x)]
        if interpolation == "bilinear":
            from .medium import GriddedField

            n = self.grid.n
            out = []
            for row in self.values:
                re = GriddedField(row.real.reshape(n, n))(x)
                im = GriddedField(row.imag.reshape(n, n))(x)
                out.append(re + 1j * im)
            return np.stack(out)
        raise ValueError(f"unknown interpolation {interpolation!r}")

    def conjugate_symmetry_error(self) -> float:
        """``max |Phi_hat(-k) - conj(Phi_hat(k))|`` relative to ``max |Phi_hat|``."""
        scale = max(np.max(np.abs(self.values)), 1e-300)
        err = 0.0
        for k in self.modes:
            if -k in self.modes:
                err = max(err, np.max(np.abs(self.mode(-k) - np.conj(self.mode(k)))))
        return err / scale

    def to_csv(self, path) -> None:
        """Columns ``i1, i2, k, re, im``."""
        n = self.grid.n
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["i1", "i2", "k", "re", "im"])
            for a, k in enumerate(self.modes):
                for i in range(self.grid.N):
                    v = self.values[a, i]
                    w.writerow([i % n, i // n, k, repr(float(v.real)), repr(float(v.imag))])


def scattering_term(modal: ModalSolution, medium: Medium, phase: PhaseFunction, x,
                    theta_v, interpolation: str = "nearest", imag_tol: float = IMAG_TOL):
    """``S(x, theta) = mu_s(x) sum_k e^{ik theta} sigma_hat(x, k) Phi_hat(x, k)``.

    The result must be real up to ``imag_tol`` (relative); a larger
    imaginary residual means the modal data lost conjugate symmetry.
    """
    x = np.asarray(x, dtype=float)
    theta_v = np.asarray(theta_v, dtype=float)
    vals = modal.at(x, interpolation)
    shape = np.broadcast_shapes(x.shape[:-1], theta_v.shape)
    total = np.zeros(shape, dtype=complex)
    for a, k in enumerate(modal.modes):
        total = total + np.exp(1j * k * theta_v) * fourier_sigma(phase, x, k) * vals[a]
    total = medium.sample(x)[0] * total
    scale = max(float(np.max(np.abs(total))) if total.size else 0.0, 1e-300)
    resid = float(np.max(np.abs(total.imag))) if total.size else 0.0
    if resid > imag_tol * max(scale, 1.0):
        raise ArithmeticError(f"scattering term has imaginary residual {resid:.3e}")
    out = total.real
    return out if out.ndim else float(out)


def reconstruct_flux(source_term, medium: Medium, x, v, n_s: int = 8, q: int = 8,
                     line_quad: LineQuadrature = DEFAULT_LINE_QUAD) -> float:
    """Photon flux by integrating along the backward characteristic.

    ``Phi(x, v) = int_0^tau E(x, x - s v) (S + f)(x - s v, v) ds`` with
    ``n_s`` Gauss-Legendre panels of ``q`` nodes.  ``source_term(y, theta)``
    must return ``S + f`` at points ``y`` for direction angle ``theta``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    tau = exit_distance(x, v)
    if tau == 0.0:
        return 0.0
    t, w = np.polynomial.legendre.leggauss(q)
    edges = np.linspace(0.0, tau, n_s + 1)
    a, b = edges[:-1, None], edges[1:, None]
    s = (0.5 * (b - a) * (t + 1.0) + a).ravel()
    ws = (0.5 * (b - a) * w).ravel()
    y = x - s[:, None] * v
    theta = float(np.arctan2(v[1], v[0]))
    att = optical_factor(medium, line_quad, np.broadcast_to(x, y.shape), y)
    vals = np.asarray(source_term(y, theta), dtype=float)
    return float(np.sum(ws * att * vals))


def modal_source_term(modal: ModalSolution, medium: Medium, phase: PhaseFunction, f,
                      interpolation: str = "nearest"):
    """``(y, theta) -> S(y, theta) + f(y)`` for :func:`reconstruct_flux`."""

    def g(y, theta):
        return scattering_term(modal, medium, phase, y, theta, interpolation) + f(y)

    return g


def angular_coefficients(values: Sequence[float] | np.ndarray, ks: Iterable[int]) -> dict[int, complex]:
    """Trapezoid Fourier coefficients of samples on a uniform angle grid starting at 0."""
    values = np.asarray(values)
    theta = 2.0 * np.pi * np.arange(values.size) / values.size
    return {int(k): complex(np.mean(values * np.exp(-1j * k * theta))) for k in ks}
