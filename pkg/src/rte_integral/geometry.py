"""Unit-square domain, uniform cell grid, exit distances and inter-point angles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class Domain:
    """The unit square ``[0, 1]^2``.

    ``diameter`` is also the supremum of :func:`exit_distance` over all
    positions and directions.
    """

    d: int = 2
    lower: tuple[float, float] = (0.0, 0.0)
    upper: tuple[float, float] = (1.0, 1.0)

    @property
    def diameter(self) -> float:
        return SQRT2

    @property
    def max_exit_distance(self) -> float:
        return self.diameter

    def contains(self, x, closed: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if closed:
            return np.all((x >= 0.0) & (x <= 1.0), axis=-1)
        return np.all((x > 0.0) & (x < 1.0), axis=-1)


UNIT_SQUARE = Domain()


@dataclass(frozen=True)
class Grid:
    """Uniform ``n x n`` partition of the unit square.

    Linear index ``i = i1 + n * i2`` (x1 varies fastest), so
    ``values.reshape(n, n)`` gives an array indexed ``[i2, i1]``.
    """

    n: int
    centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        h = 1.0 / self.n
        c = (np.arange(self.n) + 0.5) * h
        x1, x2 = np.meshgrid(c, c, indexing="xy")
        pts = np.column_stack([x1.ravel(), x2.ravel()])
        pts.setflags(write=False)
        object.__setattr__(self, "centers", pts)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def N(self) -> int:
        return self.n * self.n

    @property
    def volume(self) -> float:
        return self.h * self.h

    def index(self, i1: int, i2: int) -> int:
        return int(i1) + self.n * int(i2)

    def multi_index(self, i) -> tuple[np.ndarray, np.ndarray]:
        i = np.asarray(i)
        return i % self.n, i // self.n

    def nearest_cell(self, x) -> np.ndarray:
        """Linear index of the cell containing each point (boundary points clamp inward)."""
        x = np.asarray(x, dtype=float)
        ij = np.clip(np.floor(x * self.n).astype(int), 0, self.n - 1)
        return ij[..., 0] + self.n * ij[..., 1]


def _check_unit(v: np.ndarray, tol: float = 1e-10) -> None:
    norm = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norm - 1.0) > tol):
        raise ValueError("direction must be a unit vector")


def exit_distance(x, v) -> np.ndarray | float:
    """Distance travelled from ``x`` backwards along ``v`` before leaving the unit square.

    Returns ``sup{t : x - s v in Omega for 0 <= s < t}``; broadcasts over
    leading axes of ``x`` and ``v``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_unit(v)
    x, v = np.broadcast_arrays(x, v)
    # the backward ray x - s v meets the slab [0, 1] in coordinate j at
    # s = x_j / v_j (v_j > 0) or s = (x_j - 1) / v_j (v_j < 0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        s = np.where(v > 0, x / v, np.where(v < 0, (x - 1.0) / v, np.inf))
    t = np.min(s, axis=-1)
    t = np.clip(t, 0.0, SQRT2)
    return t if t.ndim else float(t)


def angle_between(x, y) -> np.ndarray | float:
    """Polar angle of ``x - y`` in ``(-pi, pi]``."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if np.any(np.all(d == 0.0, axis=-1)):
        raise ValueError("angle_between is undefined for coincident points")
    theta = np.arctan2(d[..., 1], d[..., 0])
    # arctan2 returns -pi for (-r, -0.0); fold onto +pi
    theta = np.where(theta == -np.pi, np.pi, theta)
    return theta if theta.ndim else float(theta)
