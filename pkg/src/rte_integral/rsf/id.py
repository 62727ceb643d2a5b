"""Interpolative decomposition by column-pivoted QR."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla


def interpolative_decomposition(block, eps: float):
    """Return ``(skel, redund, T)`` with ``block[:, redund] ~= block[:, skel] @ T``.

    The rank is the smallest ``k`` whose trailing triangular factor has
    Frobenius norm at most ``eps * |R_00|``, which bounds the spectral
    reconstruction error by ``eps * ||block||_2``.  Pivoting follows LAPACK
    (largest remaining column norm, first index on ties).
    """
    A = np.asarray(block)
    if eps <= 0:
        raise ValueError("eps must be positive")
    m, n = A.shape
    if n == 0:
        return np.zeros(0, int), np.zeros(0, int), np.zeros((0, 0), dtype=A.dtype)
    if m == 0 or not np.any(A):
        return np.zeros(0, int), np.arange(n), np.zeros((0, n), dtype=A.dtype)
    R, perm = sla.qr(A, mode="r", pivoting=True, check_finite=False)
    R = R[0] if isinstance(R, tuple) else R
    kmax = min(m, n)
    rows = np.sum(np.abs(R[:kmax]) ** 2, axis=1)
    tail = np.sqrt(np.cumsum(rows[::-1])[::-1])  # tail[k] = ||R[k:, k:]||_F
    tol = eps * abs(R[0, 0])
    small = np.nonzero(tail <= tol)[0]
    k = int(small[0]) if small.size else kmax
    k = max(k, 1)
    skel = perm[:k]
    redund = perm[k:]
    if redund.size == 0:
        return skel, redund, np.zeros((k, 0), dtype=R.dtype)
    T = sla.solve_triangular(R[:k, :k], R[:k, k:], check_finite=False)
    return skel, redund, T
