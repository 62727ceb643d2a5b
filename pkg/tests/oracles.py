"""Independent reference computations used by the tests.

Nothing here calls the package's own quadrature or assembly code.
"""

import numpy as np
from scipy import integrate

GL64 = np.polynomial.legendre.leggauss(64)


def adaptive_line_integral(fun, a=0.0, b=1.0, tol=1e-14, max_depth=20):
    """Composite 64-node Gauss-Legendre with bisection until panels agree."""
    t, w = GL64

    def panel(lo, hi):
        s = 0.5 * (hi - lo) * (t + 1.0) + lo
        return 0.5 * (hi - lo) * np.sum(w * fun(s))

    def rec(lo, hi, whole, depth):
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        if abs(left + right - whole) < tol or depth >= max_depth:
            return left + right
        return rec(lo, mid, left, depth + 1) + rec(mid, hi, right, depth + 1)

    return rec(a, b, panel(a, b), 0)


def attenuation(mu_t, x, y):
    """``exp(-|x-y| int_0^1 mu_t(x - s(x-y)) ds)`` by the adaptive rule."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = x - y
    integral = adaptive_line_integral(lambda s: mu_t(x[None, :] - s[:, None] * d[None, :]))
    return float(np.exp(-np.linalg.norm(d) * integral))


def polar_cell_integral(h, mu_t=0.0, m=0):
    """``int_cell e^{i m theta} exp(-mu_t r) / (2 pi r) dy`` for a constant ``mu_t``.

    Polar coordinates about the cell centre; the radial integral is closed
    form and the angular one goes to scipy's adaptive quad, one octant at a time.
    """
    def radial(th):
        R = (h / 2.0) / max(abs(np.cos(th)), abs(np.sin(th)))
        return R if mu_t == 0 else -np.expm1(-mu_t * R) / mu_t

    total = 0.0 + 0.0j
    for a in np.arange(8) * np.pi / 4:
        re = integrate.quad(lambda th: radial(th) * np.cos(m * th), a, a + np.pi / 4, epsabs=1e-15, epsrel=1e-13)[0]
        im = integrate.quad(lambda th: radial(th) * np.sin(m * th), a, a + np.pi / 4, epsabs=1e-15, epsrel=1e-13)[0]
        total += re + 1j * im
    total /= 2 * np.pi
    return total.real if m == 0 else total


def brute_ktilde_matrix(n, mu_t, diag):
    """Dense ``Kt`` for a constant ``mu_t`` with a loop over pairs (``diag`` on the diagonal)."""
    h = 1.0 / n
    c = [((i % n + 0.5) * h, (i // n + 0.5) * h) for i in range(n * n)]
    K = np.empty((n * n, n * n))
    for i, (a1, a2) in enumerate(c):
        for j, (b1, b2) in enumerate(c):
            if i == j:
                K[i, j] = diag
            else:
                r = np.hypot(a1 - b1, a2 - b2)
                K[i, j] = np.exp(-mu_t * r) / (2 * np.pi * r) * h * h
    return K


def fourier_coefficient(sigma, k, n_theta=256):
    """Coefficient of a ``2 pi``-periodic function by scipy quad (real and imaginary parts)."""
    re = integrate.quad(lambda t: sigma(t) * np.cos(k * t), 0, 2 * np.pi, limit=200)[0]
    im = -integrate.quad(lambda t: sigma(t) * np.sin(k * t), 0, 2 * np.pi, limit=200)[0]
    return (re + 1j * im) / (2 * np.pi)
