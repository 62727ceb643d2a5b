"""Coefficient fields, scattering phase functions and the optical attenuation factor.

Fields are callables mapping an array of points with shape ``(..., 2)`` to
an array of shape ``(...)``.  Gridded data is handled by
:class:`GriddedField`, which interpolates bilinearly between cell centers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

Field = Callable[[np.ndarray], np.ndarray]

BUMP_CENTER = (0.5, 0.5)


def _constant(value: float) -> Field:
    value = float(value)

    def f(x):
        return np.full(np.shape(x)[:-1], value)

    f.value = value
    return f


def gaussian_bump(rho: float, center=BUMP_CENTER, base: float = 1.0) -> Field:
    """``base + rho * exp(-|x - c|^2 / 4)``."""
    c = np.asarray(center, dtype=float)

    def f(x):
        x = np.asarray(x, dtype=float)
        return base + rho * np.exp(-np.sum((x - c) ** 2, axis=-1) / 4.0)

    return f


@dataclass(frozen=True)
class Medium:
    """Scattering and total transport coefficients.

    ``homogeneous`` media carry their constants in ``mu_s_value`` and
    ``mu_t_value`` so kernels can take closed-form paths.
    """

    mu_s: Field
    mu_t: Field
    homogeneous: bool = False
    mu_s_value: float | None = None
    mu_t_value: float | None = None
    name: str = "custom"

    @classmethod
    def constant(cls, mu_s: float, mu_t: float) -> "Medium":
        if mu_s < 0 or mu_t < mu_s:
            raise ValueError(f"need 0 <= mu_s <= mu_t, got mu_s={mu_s}, mu_t={mu_t}")
        return cls(_constant(mu_s), _constant(mu_t), True, float(mu_s), float(mu_t),
                   name=f"constant(mu_s={mu_s:g}, mu_t={mu_t:g})")

    @classmethod
    def gaussian(cls, rho: float, mu_a: float = 0.2, center=BUMP_CENTER) -> "Medium":
        """``mu_s = 1 + rho exp(-|x-c|^2/4)`` and ``mu_t = mu_s + mu_a``."""
        mu_s = gaussian_bump(rho, center)
        mu_t = gaussian_bump(rho, center, base=1.0 + mu_a)
        if rho == 0:
            return cls.constant(1.0, 1.0 + mu_a)
        return cls(mu_s, mu_t, False, name=f"gaussian(rho={rho:g}, mu_a={mu_a:g})")

    @classmethod
    def from_fields(cls, mu_s: Field, mu_t: Field, name: str = "custom") -> "Medium":
        return cls(mu_s, mu_t, False, name=name)

    def sample(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.mu_s(x), dtype=float), np.asarray(self.mu_t(x), dtype=float)

    def mu_s_sup(self, points) -> float:
        if self.homogeneous:
            return float(self.mu_s_value)
        return float(np.max(self.mu_s(np.asarray(points, dtype=float))))

    def validate(self, points, tol: float = 1e-14) -> None:
        """Raise ``ValueError`` unless ``0 <= mu_s <= mu_t`` at every sample point."""
        s, t = self.sample(points)
        if np.any(s < -tol) or np.any(s > t + tol * np.maximum(1.0, np.abs(t))):
            raise ValueError(f"medium {self.name} violates 0 <= mu_s <= mu_t")


def sample_mu(medium: Medium, x) -> tuple:
    s, t = medium.sample(x)
    if s.ndim == 0:
        return float(s), float(t)
    return s, t


# ---------------------------------------------------------------------------
# phase functions


def _trapezoid_coefficient(sigma, x, k: int, n_theta: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    x = np.asarray(x, dtype=float)
    vals = sigma(x[..., None, :], theta)
    return np.mean(vals * np.exp(-1j * k * theta), axis=-1)


@dataclass(frozen=True)
class PhaseFunction:
    """Scattering phase function on the circle, normalised to unit average.

    Either ``sigma(x, theta)`` (analytic, Fourier coefficients computed on
    demand by the trapezoid rule) or ``coefficients`` mapping a frequency to
    a constant or to a field ``x -> sigma_hat(x, k)``.  Frequencies missing
    from ``coefficients`` are zero.
    """

    sigma: Callable | None = None
    coefficients: Mapping[int, object] | None = None
    n_theta: int = 64
    bandwidth: int = 16
    name: str = "custom"

    def __post_init__(self):
        if (self.sigma is None) == (self.coefficients is None):
            raise ValueError("give exactly one of sigma or coefficients")

    @classmethod
    def isotropic(cls) -> "PhaseFunction":
        return cls(coefficients={0: 1.0}, name="isotropic")

    @classmethod
    def from_coefficients(cls, coefficients: Mapping[int, object], name: str = "custom") -> "PhaseFunction":
        coefficients = dict(coefficients)
        coefficients.setdefault(0, 1.0)
        return cls(coefficients=coefficients, name=name)

    @classmethod
    def from_function(cls, sigma: Callable, n_theta: int = 64, bandwidth: int = 16,
                      name: str = "custom") -> "PhaseFunction":
        """``sigma(theta)`` or ``sigma(x, theta)``; a one-argument callable is taken as homogeneous."""
        import inspect

        try:
            nargs = len(inspect.signature(sigma).parameters)
        except (TypeError, ValueError):
            nargs = 2
        if nargs == 1:
            f1 = sigma

            def sigma(x, theta):
                return np.broadcast_to(np.real_if_close(f1(theta)), np.broadcast_shapes(
                    np.shape(x)[:-1], np.shape(theta)))

        return cls(sigma=sigma, n_theta=n_theta, bandwidth=bandwidth, name=name)

    @property
    def known_modes(self) -> list[int] | None:
        if self.coefficients is None:
            return None
        return sorted(self.coefficients)

    def hat(self, x, k: int) -> np.ndarray:
        """Fourier coefficient ``sigma_hat(x, k)`` at points ``x`` (complex)."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        if self.coefficients is not None:
            c = self.coefficients.get(int(k), 0.0)
            if callable(c):
                return np.asarray(c(x), dtype=complex)
            return np.full(shape, complex(c))
        n_theta = max(self.n_theta, 4 * abs(int(k)) + 4)
        return _trapezoid_coefficient(self.sigma, x, int(k), n_theta)

    def is_homogeneous(self) -> bool:
        if self.coefficients is None:
            return False
        return not any(callable(c) for c in self.coefficients.values())


def henyey_like_cosine(g: float = 0.2) -> PhaseFunction:
    """``1 + g e^{i theta} + g e^{-i theta}`` as exact coefficients."""
    return PhaseFunction.from_coefficients({-1: g, 0: 1.0, 1: g}, name=f"cosine(g={g:g})")


def gaussian_bump_anisotropic(rho: float, mu_a: float = 0.2, center=BUMP_CENTER) -> tuple[Medium, PhaseFunction]:
    """Medium and phase with ``mu_s sigma = 1 + (2 + 2 cos theta) rho exp(-|x-c|^2/4)``.

    The zeroth mode gives ``mu_s = 1 + 2 rho g`` and the first modes give
    ``sigma_hat(x, +-1) = rho g / mu_s`` with ``g`` the Gaussian bump.
    """
    c = np.asarray(center, dtype=float)

    def g(x):
        return np.exp(-np.sum((np.asarray(x, dtype=float) - c) ** 2, axis=-1) / 4.0)

    def mu_s(x):
        return 1.0 + 2.0 * rho * g(x)

    def mu_t(x):
        return 1.0 + mu_a + 2.0 * rho * g(x)

    def first(x):
        gx = rho * g(x)
        return gx / (1.0 + 2.0 * gx)

    medium = Medium(mu_s, mu_t, rho == 0, 1.0 if rho == 0 else None,
                    1.0 + mu_a if rho == 0 else None, name=f"aniso-bump(rho={rho:g})")
    phase = PhaseFunction.from_coefficients({-1: first, 0: 1.0, 1: first}, name=f"aniso-bump(rho={rho:g})")
    return medium, phase


# ---------------------------------------------------------------------------
# line quadrature and attenuation


@dataclass(frozen=True)
class LineQuadrature:
    """Gauss-Legendre rule on ``[0, 1]`` with weights summing to one."""

    q: int = 5
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        t, w = np.polynomial.legendre.leggauss(self.q)
        object.__setattr__(self, "nodes", 0.5 * (t + 1.0))
        object.__setattr__(self, "weights", 0.5 * w)


DEFAULT_LINE_QUAD = LineQuadrature(5)


def optical_depth(medium: Medium, quad: LineQuadrature, x, y) -> np.ndarray:
    """``|x - y| * int_0^1 mu_t(x - s (x - y)) ds`` (broadcasting over leading axes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.sqrt(np.sum(d * d, axis=-1))
    if medium.homogeneous:
        return medium.mu_t_value * r
    pts = x[..., None, :] - quad.nodes[:, None] * d[..., None, :]
    return r * (medium.mu_t(pts) @ quad.weights)


def optical_factor(medium: Medium, quad: LineQuadrature, x, y) -> np.ndarray | float:
    """Attenuation ``E(x, y) = exp(-|x-y| int_0^1 mu_t(x - s(x-y)) ds)`` in ``(0, 1]``."""
    e = np.exp(-optical_depth(medium, quad, x, y))
    return e if np.ndim(e) else float(e)


# ---------------------------------------------------------------------------
# gridded coefficient ingestion


@dataclass(frozen=True)
class GriddedField:
    """Cell-centred ``n x n`` samples (indexed ``[i2, i1]``) with bilinear interpolation.

    Outside the ring of cell centres the value is clamped to the nearest
    centre row or column.
    """

    values: np.ndarray
    name: str = "field"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("gridded field must be a square n x n array")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        if n == 1:
            return np.full(x.shape[:-1], self.values[0, 0])
        # continuous index with centres at integer positions
        t = np.clip(x * n - 0.5, 0.0, n - 1.0)
        i = np.minimum(np.floor(t).astype(int), n - 2)
        a = t - i
        i1, i2 = i[..., 0], i[..., 1]
        a1, a2 = a[..., 0], a[..., 1]
        v = self.values
        return ((1 - a1) * (1 - a2) * v[i2, i1] + a1 * (1 - a2) * v[i2, i1 + 1]
                + (1 - a1) * a2 * v[i2 + 1, i1] + a1 * a2 * v[i2 + 1, i1 + 1])


def write_field(path, values, name: str = "field") -> None:
    """Write an ``n x n`` field.

    ``.csv``: a header line ``# n=<n> name=<name>`` followed by ``n`` rows
    (row ``i2``, columns ``i1``).  Any other suffix: an ASCII header line
    ``<n> <name>\\n`` followed by ``n*n`` little-endian float64 values in the
    same row-major order.
    """
    path = Path(path)
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if path.suffix.lower() == ".csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# n={n} name={name}\n")
            np.savetxt(fh, v, delimiter=",", fmt="%.17g")
    else:
        with open(path, "wb") as fh:
            fh.write(f"{n} {name}\n".encode("ascii"))
            fh.write(v.astype("<f8").tobytes(order="C"))


def read_field(path) -> GriddedField:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().lstrip("#").split()
            meta = dict(item.split("=", 1) for item in header)
            values = np.loadtxt(fh, delimiter=",", ndmin=2)
        n = int(meta["n"])
        name = meta.get("name", "field")
    else:
        raw = path.read_bytes()
        line, _, body = raw.partition(b"\n")
        n_str, _, name = line.decode("ascii").partition(" ")
        n = int(n_str)
        values = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)
    if values.shape != (n, n):
        raise ValueError(f"{path}: header says n={n} but data has shape {values.shape}")
    return GriddedField(values, name=name or "field")


def gridded_medium(mu_s: GriddedField, mu_t: GriddedField) -> Medium:
    medium = Medium(mu_s, mu_t, False, name=f"gridded({mu_s.name}, {mu_t.name})")
    s, t = mu_s.values, mu_t.values
    if np.any(s < 0) or np.any(s > t):
        warnings.warn("gridded medium violates 0 <= mu_s <= mu_t at some samples")
    return medium
