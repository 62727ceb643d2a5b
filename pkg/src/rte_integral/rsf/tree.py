"""Uniform-depth quadtree over (generalised) points in the unit square."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_LEAF_CAPACITY = 8


@dataclass
class Box:
    level: int
    b1: int
    b2: int
    points: np.ndarray  # indices of all points inside
    children: list = field(default_factory=list)

    @property
    def width(self) -> float:
        return 1.0 / (1 << self.level)

    @property
    def center(self) -> np.ndarray:
        w = self.width
        return np.array([(self.b1 + 0.5) * w, (self.b2 + 0.5) * w])

    @property
    def radius(self) -> float:
        """Circumradius."""
        return 0.5 * self.width * np.sqrt(2.0)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class ClusterTree:
    """``levels[l]`` lists the nonempty boxes at level ``l`` (level 0 is the root)."""

    coords: np.ndarray
    leaf_capacity: int
    levels: list

    @property
    def depth(self) -> int:
        """Number of levels, root included."""
        return len(self.levels)

    @property
    def root(self) -> Box:
        return self.levels[0][0]

    @property
    def leaves(self) -> list:
        return self.levels[-1]

    def __len__(self) -> int:
        return len(self.coords)


def _box_ids(coords: np.ndarray, level: int):
    s = 1 << level
    b = np.clip(np.floor(coords * s).astype(np.int64), 0, s - 1)
    return b[:, 0], b[:, 1]


def build_tree(coords, leaf_capacity: int = 64, max_depth: int = 12) -> ClusterTree:
    """Refine uniformly until every box holds at most ``leaf_capacity`` points.

    Points sharing a location (one cell at several angular modes) always
    land in the same box.  Refinement stops at ``max_depth`` regardless.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    if len(coords) < 1:
        raise ValueError("need at least one point")
    if leaf_capacity < MIN_LEAF_CAPACITY:
        raise ValueError(f"leaf_capacity must be >= {MIN_LEAF_CAPACITY}")
    L = 0
    while L < max_depth:
        b1, b2 = _box_ids(coords, L)
        counts = np.bincount(b1 + (b2 << L))
        if counts.max() <= leaf_capacity:
            break
        L += 1
    levels = []
    for level in range(L + 1):
        b1, b2 = _box_ids(coords, level)
        key = b1 + (b2 << level)
        order = np.argsort(key, kind="stable")
        uniq, start = np.unique(key[order], return_index=True)
        bounds = list(start) + [len(order)]
        boxes = []
        for u, a, b in zip(uniq, bounds[:-1], bounds[1:]):
            boxes.append(Box(level, int(u % (1 << level)), int(u >> level), np.sort(order[a:b])))
        levels.append(boxes)
    for level in range(L):
        lookup = {(b.b1, b.b2): b for b in levels[level]}
        for child in levels[level + 1]:
            lookup[(child.b1 >> 1, child.b2 >> 1)].children.append(child)
    return ClusterTree(coords, leaf_capacity, levels)
