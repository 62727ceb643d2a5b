"""Homogeneous medium: dense direct solve against the FFT + MINRES backend.

    python demos/homogeneous_backends.py

Prints the relative L2 gap per tolerance and the iteration counts, which
grow as the medium becomes more diffusive.
"""

import time

from rte_integral import Grid, KrylovConfig, Medium, assemble_iso, build_symbol, solve_dense, solve_fft
from rte_integral.harness import make_source, relative_l2

n = 32
grid = Grid(n)
medium = Medium.constant(mu_s=1.0, mu_t=1.2)
f = make_source("f1", grid)

t0 = time.perf_counter()
u_ref = solve_dense(assemble_iso(grid, medium), f).u
print(f"dense n={n}: {time.perf_counter() - t0:.2f}s")

symbol = build_symbol(grid, medium)
for eps in (1e-4, 1e-6, 1e-8):
    sol = solve_fft(symbol, medium, f, KrylovConfig(tol=eps))
    print(f"fft eps={eps:.0e}: error {relative_l2(sol.u, u_ref):.2e} after {sol.iterations} iterations")

# more scattering, more iterations
for mu_s in (1.0, 5.0, 10.0):
    med = Medium.constant(mu_s, mu_s + 0.2)
    sol = solve_fft(build_symbol(grid, med), med, f, KrylovConfig(tol=1e-8))
    print(f"mu_s={mu_s:g}: {sol.iterations} iterations")
