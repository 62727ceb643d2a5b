"""Recursive skeletonization factorization (weak admissibility).

Boxes are processed from the leaves up.  Each box's interactions with
everything outside it are compressed by an interpolative decomposition
against its near neighbours plus a set of proxy points standing in for the
far field.  The redundant points are then eliminated; the only fill is in
the skeleton's own diagonal block, so entries between different boxes stay
equal to the original kernel entries.  What remains at the root is factored
densely.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..exceptions import FactorizationError
from ..kernel import KernelMatrix
from .id import interpolative_decomposition
from .tree import ClusterTree, build_tree


@dataclass(frozen=True)
class ProxyRule:
    """Proxy points on concentric rings around a box.

    The first ring sits at ``radius_factor`` times the box circumradius;
    further rings grow geometrically by ``ring_ratio`` until they cover the
    domain.  Points outside the unit square are dropped.  Each ring's rows
    are scaled by the square root of the number of grid cells it stands in
    for, so the ID weighs proxies like the points they replace.
    """

    radius_factor: float = 1.5
    n_points: int = 64
    ring_ratio: float = 1.3
    weighted: bool = True

    def __post_init__(self):
        if self.radius_factor <= 1.0:
            raise ValueError("the proxy radius must exceed the box circumradius")
        if self.n_points < 4 or self.ring_ratio <= 1.0:
            raise ValueError("need n_points >= 4 and ring_ratio > 1")

    def inner_radius(self, box) -> float:
        return self.radius_factor * box.radius

    def points(self, box, h: float):
        c = box.center
        r = self.inner_radius(box)
        far = np.max(np.hypot(np.array([0.0, 1.0, 0.0, 1.0]) - c[0], np.array([0.0, 0.0, 1.0, 1.0]) - c[1]))
        base = 2.0 * np.pi * np.arange(self.n_points) / self.n_points
        pts, wts = [], []
        j = 0
        while r <= far * self.ring_ratio:
            t = base + (np.pi / self.n_points) * (j % 2)
            p = c + r * np.column_stack([np.cos(t), np.sin(t)])
            inside = np.all((p >= 0.0) & (p <= 1.0), axis=1)
            area = 2.0 * np.pi * r * r * (self.ring_ratio - 1.0) / self.n_points
            pts.append(p[inside])
            wts.append(np.full(int(inside.sum()), np.sqrt(max(area / (h * h), 1.0)) if self.weighted else 1.0))
            r *= self.ring_ratio
            j += 1
        if not pts:
            return np.zeros((0, 2)), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)


DEFAULT_PROXY = ProxyRule()


@dataclass
class BoxStep:
    level: int
    box: tuple
    skel: np.ndarray
    redund: np.ndarray
    T: np.ndarray
    G: np.ndarray  # B_RR^{-1} B_RS
    E: np.ndarray | None  # B_SR B_RR^{-1}; None on the symmetric path (E = G^T)
    B_RR: np.ndarray
    factor: tuple

    @property
    def nbytes(self) -> int:
        n = self.T.nbytes + self.G.nbytes + self.B_RR.nbytes + self.factor[1][0].nbytes
        return n + (self.E.nbytes if self.E is not None else 0)


@dataclass
class LevelStats:
    level: int
    boxes: int
    points_in: int
    skeletons: int
    nbytes: int


@dataclass
class SkelFactorization:
    kernel: KernelMatrix
    tree: ClusterTree
    eps: float
    symmetric: bool
    steps: list
    root_idx: np.ndarray
    root_block: np.ndarray
    root_factor: tuple
    stats: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.kernel.size

    @property
    def dtype(self):
        return self.root_block.dtype if self.root_block.size else self.kernel.dtype

    @property
    def nbytes(self) -> int:
        return sum(s.nbytes for s in self.steps) + self.root_block.nbytes + self.root_factor[1][0].nbytes

    @property
    def skeleton_total(self) -> int:
        return sum(s.skeletons for s in self.stats)

    def _prepare(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.size or x.ndim > 2:
            raise ValueError(f"expected leading dimension {self.size}, got shape {x.shape}")
        return np.array(x, dtype=np.result_type(x.dtype, self.dtype), copy=True)

    def apply(self, x) -> np.ndarray:
        """Product with the compressed operator (``~= A x``)."""
        y = self._prepare(x)
        for s in self.steps:
            S, R = s.skel, s.redund
            y[S] += s.T @ y[R]
            y[R] += s.G @ y[S]
        for s in self.steps:
            y[s.redund] = s.B_RR @ y[s.redund]
        y[self.root_idx] = self.root_block @ y[self.root_idx]
        for s in reversed(self.steps):
            S, R = s.skel, s.redund
            E = s.G.T if s.E is None else s.E
            y[S] += E @ y[R]
            y[R] += s.T.T @ y[S]
        return y

    def solve(self, b) -> np.ndarray:
        """Apply the inverse of the compressed operator."""
        x = self._prepare(b)
        for s in self.steps:
            S, R = s.skel, s.redund
            x[R] -= s.T.T @ x[S]
            E = s.G.T if s.E is None else s.E
            x[S] -= E @ x[R]
        for s in self.steps:
            x[s.redund] = _factor_solve(s.factor, x[s.redund])
        x[self.root_idx] = _factor_solve(self.root_factor, x[self.root_idx])
        for s in reversed(self.steps):
            S, R = s.skel, s.redund
            x[R] -= s.G @ x[S]
            x[S] -= s.T @ x[R]
        return x

    def write_stats_csv(self, path) -> None:
        """Columns ``level, boxes, points_in, skeletons, bytes``; the root is level 0."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "boxes", "points_in", "skeletons", "bytes"])
            for s in self.stats:
                w.writerow([s.level, s.boxes, s.points_in, s.skeletons, s.nbytes])


def _factor_dense(A: np.ndarray, symmetric: bool, level: int, box):
    if A.shape[0] == 0:
        return ("lu", (np.zeros((0, 0), dtype=A.dtype), np.zeros(0, dtype=np.int32)))
    if not np.all(np.isfinite(A)):
        raise FactorizationError(f"non-finite pivot block at level {level}, box {box}", level, box)
    if symmetric:
        try:
            return ("chol", sla.cho_factor(A, lower=True, check_finite=False))
        except np.linalg.LinAlgError:
            pass
    with warnings.catch_warnings():
        # the pivot test below reports singularity with box context
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() <= np.finfo(float).eps * max(d.max(), 1e-300) * A.shape[0]:
        raise FactorizationError(f"singular pivot block at level {level}, box {box}", level, box)
    return ("lu", (lu, piv))


def _factor_solve(factor, b):
    kind, fac = factor
    if b.shape[0] == 0:
        return b
    if kind == "chol":
        return sla.cho_solve(fac, b, check_finite=False)
    return sla.lu_solve(fac, b, check_finite=False)


def _near_points(coords, active, idx_mask, center, radius):
    d = coords - center
    inside = (d[:, 0] ** 2 + d[:, 1] ** 2) < radius * radius
    return np.nonzero(inside & active & ~idx_mask)[0]


def _assemble(km: KernelMatrix, parts):
    """Diagonal block over the union of ``parts`` (``(idx, block)`` pairs): the
    stored child blocks on the diagonal, original entries elsewhere."""
    idx = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, int)
    A = km.block(idx, idx)
    pos = 0
    for sub, blk in parts:
        k = len(sub)
        A[pos:pos + k, pos:pos + k] = blk
        pos += k
    return idx, A


def factorize(km: KernelMatrix, eps: float, tree: ClusterTree | None = None, leaf_capacity: int = 64,
              proxy: ProxyRule = DEFAULT_PROXY, symmetric: bool | None = None) -> SkelFactorization:
    """Build the factorization of ``km``'s system matrix to tolerance ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if symmetric is None:
        symmetric = km.form == "symmetric"
    if symmetric and km.form != "symmetric":
        raise ValueError("the symmetric path needs the symmetric form")
    coords = km.coords
    if tree is None:
        tree = build_tree(coords, leaf_capacity)
    P = km.size
    h = km.grid.h
    active = np.ones(P, dtype=bool)
    stored = {}
    steps = []
    stats = []
    L = tree.depth - 1
    for level in range(L, 0, -1):
        lvl_in = lvl_skel = lvl_bytes = 0
        for box in tree.levels[level]:
            key = (box.b1, box.b2)
            if box.is_leaf:
                idx = box.points
                A = km.block(idx, idx)
            else:
                idx, A = _assemble(km, [stored.pop((level + 1, c.b1, c.b2)) for c in box.children])
            mask = np.zeros(P, dtype=bool)
            mask[idx] = True
            near = _near_points(coords, active, mask, box.center, proxy.inner_radius(box))
            pxy, wts = proxy.points(box, h)
            rows = [km.block(near, idx)]
            if len(pxy):
                rows.append(np.tile(wts, km.M)[:, None] * km.proxy_block(idx, pxy))
            if not symmetric:
                rows.append(km.block(idx, near).T)
                if len(pxy):
                    rows.append(np.tile(wts, km.M)[:, None] * km.proxy_block(idx, pxy, transpose=True))
            Z = np.vstack(rows)
            sk, rd, T = interpolative_decomposition(Z, eps)
            A_SS = A[np.ix_(sk, sk)]
            A_SR = A[np.ix_(sk, rd)]
            A_RS = A[np.ix_(rd, sk)]
            A_RR = A[np.ix_(rd, rd)]
            B_RS = A_RS - T.T @ A_SS
            B_SR = A_SR - A_SS @ T
            B_RR = A_RR - T.T @ A_SR - A_RS @ T + T.T @ A_SS @ T
            if symmetric:
                B_RR = 0.5 * (B_RR + B_RR.T)
            fac = _factor_dense(B_RR, symmetric, level, key)
            G = _factor_solve(fac, B_RS)
            if symmetric:
                E = None
                A_SS = A_SS - B_SR @ G
                A_SS = 0.5 * (A_SS + A_SS.T)
            else:
                E = _right_solve(fac, B_SR)
                A_SS = A_SS - E @ B_RS
            step = BoxStep(level, key, idx[sk], idx[rd], T, G, E, B_RR, fac)
            steps.append(step)
            active[idx[rd]] = False
            stored[(level, box.b1, box.b2)] = (idx[sk], A_SS)
            lvl_in += len(idx)
            lvl_skel += len(sk)
            lvl_bytes += step.nbytes
        stats.append(LevelStats(level, len(tree.levels[level]), lvl_in, lvl_skel, lvl_bytes))
    if L == 0:
        root_idx = tree.root.points
        root = km.block(root_idx, root_idx)
    else:
        root_idx, root = _assemble(km, [stored.pop((1, c.b1, c.b2)) for c in tree.root.children])
    if symmetric:
        root = 0.5 * (root + root.T)
    root_fac = _factor_dense(root, symmetric, 0, (0, 0))
    stats.append(LevelStats(0, 1, len(root_idx), len(root_idx), root.nbytes + root_fac[1][0].nbytes))
    return SkelFactorization(km, tree, eps, symmetric, steps, root_idx, root, root_fac, stats)


def _right_solve(factor, B):
    """``B @ inv(A)`` for a factored ``A``."""
    kind, fac = factor
    if B.shape[1] == 0:
        return B.copy()
    if kind == "chol":
        return sla.cho_solve(fac, B.T, check_finite=False).T
    return sla.lu_solve(fac, B.T, trans=1, check_finite=False).T
