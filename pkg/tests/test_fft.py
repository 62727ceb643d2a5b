import csv

import numpy as np
import pytest

from rte_integral.angular import ModeSet
from rte_integral.dense import assemble_aniso, assemble_iso, solve_dense
from rte_integral.exceptions import ConvergenceError, UnsupportedBackendError
from rte_integral.fft import KrylovConfig, apply_conv, apply_system, build_symbol, solve_fft, write_history_csv
from rte_integral.geometry import Grid
from rte_integral.harness import make_source, relative_l2
from rte_integral.medium import Medium, PhaseFunction, henyey_like_cosine

CON = Medium.constant(1.0, 1.2)
M3 = ModeSet([-1, 0, 1])


@pytest.fixture(scope="module")
def iso8():
    g = Grid(8)
    return build_symbol(g, CON), assemble_iso(g, CON)


@pytest.fixture(scope="module")
def aniso8():
    g = Grid(8)
    ph = henyey_like_cosine(0.3)
    return build_symbol(g, CON, ph, M3), assemble_aniso(g, CON, ph, M3)


def test_one_hot_columns_match_dense_iso(iso8):
    sym, dense = iso8
    scale = np.max(np.abs(dense.Kt))
    for j in range(sym.size):
        e = np.zeros(sym.size)
        e[j] = 1.0
        assert np.max(np.abs(apply_conv(sym, e) - dense.Kt[:, j])) <= 1e-12 * scale


def test_one_hot_columns_match_dense_aniso(aniso8):
    sym, dense = aniso8
    scale = np.max(np.abs(dense.Kt))
    for j in range(0, sym.size, 7):
        e = np.zeros(sym.size, dtype=complex)
        e[j] = 1.0
        assert np.max(np.abs(apply_conv(sym, e) - dense.Kt[:, j])) <= 1e-12 * scale


def test_all_ones_gives_row_sums(iso8):
    sym, dense = iso8
    rs = dense.Kt.sum(axis=1)
    assert np.max(np.abs(apply_conv(sym, np.ones(sym.size)) - rs)) <= 1e-12 * np.max(rs)


@pytest.mark.parametrize("which", ["iso", "aniso"])
def test_random_apply_matches_dense(which, iso8, aniso8, rng):
    sym, dense = iso8 if which == "iso" else aniso8
    x = rng.standard_normal(sym.size)
    if which == "aniso":
        x = x + 1j * rng.standard_normal(sym.size)
    ref = dense.Kt @ x
    assert np.linalg.norm(apply_conv(sym, x) - ref) <= 1e-12 * np.linalg.norm(ref)
    ref = dense.K @ x
    assert np.linalg.norm(apply_conv(sym, x, plain=True) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_system_apply_matches_dense(iso8, aniso8, rng):
    sym, dense = iso8
    x = rng.standard_normal(sym.size)
    assert np.allclose(apply_system(sym, x, "symmetric"), dense.A @ x, rtol=0, atol=1e-13)
    sym, dense = aniso8
    x = rng.standard_normal(sym.size) + 0j
    assert np.allclose(apply_system(sym, x, "plain"), dense.A @ x, rtol=0, atol=1e-13)


def test_complex_input_on_isotropic_symbol(iso8, rng):
    sym, dense = iso8
    x = rng.standard_normal(sym.size) + 1j * rng.standard_normal(sym.size)
    assert np.allclose(apply_conv(sym, x), dense.Kt @ x, rtol=0, atol=1e-13)


def test_linearity(iso8, rng):
    sym, _ = iso8
    p, q = rng.standard_normal((2, sym.size))
    a, b = 1.7, -0.3
    lhs = apply_conv(sym, a * p + b * q)
    rhs = a * apply_conv(sym, p) + b * apply_conv(sym, q)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * np.max(np.abs(lhs))


def test_zero_input_and_zero_source(iso8):
    sym, _ = iso8
    assert not np.any(apply_conv(sym, np.zeros(sym.size)))
    sol = solve_fft(sym, CON, np.zeros(64))
    assert sol.iterations == 0 and not np.any(sol.u)


def test_vanishing_coefficient_kills_its_mode():
    g = Grid(8)
    ph = PhaseFunction.from_coefficients({-1: 0.0, 0: 1.0, 1: 0.0})
    sym = build_symbol(g, CON, ph, M3)
    N = g.N
    for a in (0, 2):
        e = np.zeros(3 * N, dtype=complex)
        e[a * N + 5] = 1.0
        assert not np.any(apply_conv(sym, e, plain=True))


def test_shape_mismatch(iso8):
    sym, _ = iso8
    with pytest.raises(ValueError):
        apply_conv(sym, np.zeros(10))
    with pytest.raises(ValueError):
        solve_fft(sym, CON, np.zeros(10))


def test_inhomogeneous_is_rejected():
    with pytest.raises(UnsupportedBackendError):
        build_symbol(Grid(8), Medium.gaussian(1.0))
    sym = build_symbol(Grid(8), CON)
    with pytest.raises(UnsupportedBackendError):
        solve_fft(sym, Medium.gaussian(1.0), np.ones(64))


def test_krylov_config_validation():
    with pytest.raises(ValueError):
        KrylovConfig(tol=0.0)
    with pytest.raises(ValueError):
        KrylovConfig(method="cg")


@pytest.mark.parametrize("eps", [1e-6, 1e-8])
def test_iso_solve_matches_dense(eps):
    g = Grid(32)
    f = make_source("f1", g)
    ref = solve_dense(assemble_iso(g, CON), f).u
    sol = solve_fft(build_symbol(g, CON), CON, f, KrylovConfig(tol=eps))
    assert sol.residual <= eps
    assert relative_l2(sol.u, ref) <= 10 * eps
    assert np.allclose(sol.u_tilde, sol.u * CON.mu_s_value)


def test_aniso_solve_matches_dense():
    g = Grid(16)
    ph = henyey_like_cosine(0.2)
    f = make_source("f2", g)
    ref = solve_dense(assemble_aniso(g, CON, ph, M3), f).u
    sol = solve_fft(build_symbol(g, CON, ph, M3), CON, f, KrylovConfig(tol=1e-8))
    assert relative_l2(sol.u, ref) <= 1e-7
    assert sol.modal is not None and sol.modal.modes == M3


def test_iterations_grow_with_scattering():
    g = Grid(16)
    f = make_source("f1", g)
    its = []
    for mu_s in (1.0, 5.0, 10.0):
        med = Medium.constant(mu_s, mu_s + 0.2)
        its.append(solve_fft(build_symbol(g, med), med, f, KrylovConfig(tol=1e-8)).iterations)
    assert its == sorted(its) and its[0] < its[-1]


def test_convergence_error_carries_history():
    g = Grid(16)
    sym = build_symbol(g, CON)
    with pytest.raises(ConvergenceError) as info:
        solve_fft(sym, CON, make_source("f1", g), KrylovConfig(tol=1e-14, maxiter=2))
    assert len(info.value.history) >= 1


def test_history_csv(tmp_path):
    g = Grid(16)
    sol = solve_fft(build_symbol(g, CON), CON, make_source("f3", g), KrylovConfig(tol=1e-8))
    p = tmp_path / "hist.csv"
    write_history_csv(sol.history, p)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["iteration", "relative_residual"]
    assert len(rows) - 1 == len(sol.history)
    assert float(rows[-1][1]) <= 1e-8
