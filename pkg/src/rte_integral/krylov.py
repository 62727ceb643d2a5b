"""MINRES and restarted GMRES with a relative Euclidean residual stopping rule.

Both stop when ``||b - A x|| <= tol * ||b||``, checked against the true
residual before returning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError


@dataclass
class KrylovResult:
    x: np.ndarray
    iterations: int
    history: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.history[-1] if self.history else 0.0


def _as_matvec(A):
    if callable(A):
        return A
    return lambda v: A @ v


def _minres_cycle(matvec, b, tol_abs, maxiter, history, bnorm):
    """One MINRES run from ``x0 = 0`` (Paige-Saunders recurrences)."""
    n = b.shape[0]
    dtype = np.result_type(b.dtype, np.float64)
    x = np.zeros(n, dtype=dtype)
    beta1 = np.linalg.norm(b)
    if beta1 == 0.0:
        return x, 0
    r1 = b.copy()
    r2 = b.copy()
    y = b.copy()
    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n, dtype=dtype)
    w2 = np.zeros(n, dtype=dtype)
    it = 0
    while it < maxiter:
        it += 1
        v = y / beta
        y = matvec(v)
        if it >= 2:
            y = y - (beta / oldb) * r1
        alfa = np.vdot(v, y).real
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        oldb = beta
        beta = np.linalg.norm(y)
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = np.hypot(gbar, beta)
        gamma = max(gamma, np.finfo(float).tiny)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        history.append(phibar / bnorm)
        if phibar <= tol_abs or beta == 0.0:
            break
    return x, it


def minres(A, b, tol: float = 1e-8, maxiter: int = 10_000, max_refine: int = 5) -> KrylovResult:
    """MINRES for Hermitian ``A`` (matrix or matvec callable)."""
    matvec = _as_matvec(A)
    b = np.asarray(b)
    bnorm = np.linalg.norm(b)
    history: list[float] = []
    if bnorm == 0.0:
        return KrylovResult(np.zeros_like(b, dtype=np.result_type(b, float)), 0, [0.0])
    x = np.zeros(b.shape[0], dtype=np.result_type(b.dtype, np.float64))
    r = b.copy()
    total = 0
    for _ in range(max_refine + 1):
        dx, it = _minres_cycle(matvec, r, tol * bnorm, maxiter - total, history, bnorm)
        x = x + dx
        total += it
        r = b - matvec(x)
        true = np.linalg.norm(r) / bnorm
        if true <= tol:
            history.append(true)
            return KrylovResult(x, total, history)
        if total >= maxiter:
            break
    raise ConvergenceError(f"MINRES did not reach tol={tol:g} in {total} iterations", history)


def gmres(A, b, tol: float = 1e-8, restart: int = 50, maxiter: int = 10_000) -> KrylovResult:
    """Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations."""
    matvec = _as_matvec(A)
    b = np.asarray(b)
    dtype = np.result_type(b.dtype, np.float64)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    x = np.zeros(n, dtype=dtype)
    history: list[float] = []
    if bnorm == 0.0:
        return KrylovResult(x, 0, [0.0])
    total = 0
    r = b.astype(dtype, copy=True)
    beta = bnorm
    while total < maxiter:
        m = min(restart, maxiter - total)
        v0 = r / beta
        w0 = matvec(v0)
        # a complex operator promotes a real right-hand side
        dtype = np.result_type(dtype, w0.dtype)
        x = x.astype(dtype, copy=False)
        V = np.zeros((m + 1, n), dtype=dtype)
        H = np.zeros((m + 1, m), dtype=dtype)
        cs = np.zeros(m, dtype=dtype)
        sn = np.zeros(m, dtype=dtype)
        g = np.zeros(m + 1, dtype=dtype)
        g[0] = beta
        V[0] = v0
        j_end = 0
        for j in range(m):
            w = w0 if j == 0 else matvec(V[j])
            for i in range(j + 1):
                H[i, j] = np.vdot(V[i], w)
                w = w - H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] != 0:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + np.conj(cs[i]) * H[i + 1, j]
                H[i, j] = t
            a, c = H[j, j], H[j + 1, j]
            denom = np.sqrt(abs(a) ** 2 + abs(c) ** 2)
            if denom == 0:
                cs[j], sn[j] = 1.0, 0.0
            elif a == 0:
                cs[j], sn[j] = 0.0, 1.0
            else:
                cs[j] = abs(a) / denom
                sn[j] = (a / abs(a)) * np.conj(c) / denom
            H[j, j] = cs[j] * a + sn[j] * c
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_end = j + 1
            history.append(abs(g[j + 1]) / bnorm)
            if abs(g[j + 1]) <= tol * bnorm or H[j, j] == 0:
                break
        k = j_end
        yk = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
        x = x + yk @ V[:k]
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        true = beta / bnorm
        if true <= tol:
            history.append(true)
            return KrylovResult(x, total, history)
    raise ConvergenceError(f"GMRES did not reach tol={tol:g} in {total} iterations", history)
