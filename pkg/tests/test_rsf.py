import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rte_integral.angular import ModeSet
from rte_integral.dense import assemble_aniso, assemble_iso, solve_dense
from rte_integral.exceptions import FactorizationError
from rte_integral.fft import KrylovConfig, build_symbol, solve_fft
from rte_integral.geometry import Grid
from rte_integral.harness import make_source, relative_l2
from rte_integral.kernel import KernelMatrix
from rte_integral.medium import Medium, gaussian_bump_anisotropic, henyey_like_cosine
from rte_integral.rsf import ProxyRule, RSFSolver, build_tree, factorize, interpolative_decomposition, solve_rsf
from rte_integral.rsf.factor import _factor_dense

CON = Medium.constant(1.0, 1.2)
M3 = ModeSet([-1, 0, 1])


# -- tree ------------------------------------------------------------------

def test_tiny_tree_is_one_leaf():
    t = build_tree(np.array([[0.1, 0.1], [0.9, 0.2], [0.4, 0.6], [0.5, 0.5]]), 8)
    assert t.depth == 1 and t.root.is_leaf and len(t.root.points) == 4


def test_grid_tree_respects_capacity():
    t = build_tree(Grid(16).centers, 64)
    assert t.depth >= 2
    assert all(len(b.points) <= 64 for b in t.leaves)
    allpts = np.sort(np.concatenate([b.points for b in t.leaves]))
    assert np.array_equal(allpts, np.arange(256))


def test_generalised_points_share_leaves():
    km = KernelMatrix(Grid(8), CON, henyey_like_cosine(), M3)
    assert km.size == 192
    t = build_tree(km.coords, 16)
    assert sum(len(b.points) for b in t.leaves) == 192
    for b in t.leaves:
        cells = km.cell[b.points]
        # each cell appears once per mode
        assert np.all(np.bincount(cells)[np.unique(cells)] == 3)


def test_children_nest_inside_parents():
    t = build_tree(Grid(16).centers, 16)
    for level in t.levels[:-1]:
        for box in level:
            kids = np.sort(np.concatenate([c.points for c in box.children]))
            assert np.array_equal(kids, box.points)
            for c in box.children:
                assert (c.b1 >> 1, c.b2 >> 1) == (box.b1, box.b2)


def test_tree_errors():
    with pytest.raises(ValueError):
        build_tree(Grid(4).centers, 7)
    with pytest.raises(ValueError):
        build_tree(np.zeros((0, 2)), 64)


# -- interpolative decomposition -------------------------------------------

def test_id_rank_one(rng):
    B = np.outer(rng.standard_normal(20), rng.standard_normal(15))
    sk, rd, T = interpolative_decomposition(B, 1e-10)
    assert len(sk) == 1 and len(rd) == 14
    assert np.allclose(B[:, sk] @ T, B[:, rd], rtol=0, atol=1e-12 * np.abs(B).max())


def test_id_identity_keeps_everything():
    sk, rd, T = interpolative_decomposition(np.eye(12), 1e-10)
    assert sorted(sk) == list(range(12)) and len(rd) == 0


def test_id_zero_block():
    sk, rd, T = interpolative_decomposition(np.zeros((4, 5)), 1e-6)
    assert len(sk) == 0 and len(rd) == 5


def test_id_well_separated_kernel_block():
    g = Grid(32)
    km = KernelMatrix(g, CON)
    c = g.centers
    src = np.nonzero(np.all(c < 0.25, axis=1))[0]
    trg = np.nonzero(np.all(c > 0.75, axis=1))[0]
    B = km.ktilde_block(trg, src)
    eps = 1e-6
    sk, rd, T = interpolative_decomposition(B, eps)
    assert len(sk) < len(src) // 4
    err = np.linalg.norm(B[:, sk] @ T - B[:, rd], 2)
    assert err <= eps * np.linalg.norm(B, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_id_reconstruction_bound(rank, seed):
    r = np.random.default_rng(seed)
    B = r.standard_normal((30, rank)) @ r.standard_normal((rank, 25))
    B = B + 1e-9 * r.standard_normal(B.shape)
    eps = 1e-6
    sk, rd, T = interpolative_decomposition(B, eps)
    assert len(sk) <= rank + 1
    if len(rd):
        assert np.linalg.norm(B[:, sk] @ T - B[:, rd], 2) <= eps * np.linalg.norm(B, 2)


# -- factorization ---------------------------------------------------------

def _kernels():
    med, ph = gaussian_bump_anisotropic(1.0)
    return {
        "iso-var": KernelMatrix(Grid(16), Medium.gaussian(1.0), form="symmetric"),
        "iso-con": KernelMatrix(Grid(16), CON, form="symmetric"),
        "aniso-var": KernelMatrix(Grid(16), med, ph, M3),
    }


KERNELS = _kernels()
DENSE = {k: km.dense() for k, km in KERNELS.items()}


@pytest.mark.parametrize("name", list(KERNELS))
@pytest.mark.parametrize("eps", [1e-4, 1e-8])
def test_apply_and_solve_match_dense(name, eps, rng):
    km, A = KERNELS[name], DENSE[name]
    F = factorize(km, eps)
    x = rng.standard_normal(km.size)
    ax = A @ x
    assert np.linalg.norm(F.apply(x) - ax) <= 10 * eps * np.linalg.norm(ax)
    assert np.linalg.norm(F.solve(ax) - x) <= 10 * eps * np.linalg.norm(x)
    assert np.linalg.norm(F.solve(F.apply(x)) - x) <= 10 * eps * np.linalg.norm(x)


def test_symmetric_path_is_used_for_isotropic():
    F = factorize(KERNELS["iso-var"], 1e-6)
    assert F.symmetric and all(s.E is None for s in F.steps)
    assert not factorize(KERNELS["aniso-var"], 1e-4).symmetric
    with pytest.raises(ValueError):
        factorize(KERNELS["aniso-var"], 1e-4, symmetric=True)


def test_zero_vector():
    F = factorize(KERNELS["iso-con"], 1e-6)
    assert not np.any(F.apply(np.zeros(256)))
    assert not np.any(F.solve(np.zeros(256)))


def test_shape_mismatch():
    F = factorize(KERNELS["iso-con"], 1e-6)
    with pytest.raises(ValueError):
        F.apply(np.zeros(10))
    with pytest.raises(ValueError):
        F.solve(np.zeros((256, 2, 2)))


def test_multiple_columns(rng):
    km, A = KERNELS["iso-var"], DENSE["iso-var"]
    F = factorize(km, 1e-8)
    X = rng.standard_normal((256, 3))
    assert np.allclose(F.apply(X), A @ X, rtol=0, atol=1e-7 * np.abs(A @ X).max())


def test_single_leaf_is_dense():
    g = Grid(8)
    km = KernelMatrix(g, Medium.gaussian(1.0), form="symmetric")
    F = factorize(km, 1e-4, leaf_capacity=64)
    assert not F.steps and F.tree.depth == 1
    f = make_source("f1", g)
    ref = solve_dense(assemble_iso(g, Medium.gaussian(1.0)), f).u
    u = RSFSolver(g, Medium.gaussian(1.0), 1e-4).solve(f).u
    assert relative_l2(u, ref) <= 1e-12


@pytest.mark.parametrize("name", list(KERNELS))
def test_accuracy_and_skeletons_monotone_in_eps(name):
    km, A = KERNELS[name], DENSE[name]
    g = km.grid
    f = make_source("f1", g)
    if km.phase is None:
        b = km.ktilde_dense() @ f
    else:
        b = (np.eye(km.size) - A) @ km.source_vector(f)  # K g_hat
    ref = np.linalg.solve(A, b)
    errs, skel = [], []
    for eps in (1e-4, 1e-6, 1e-8):
        F = factorize(km, eps)
        errs.append(relative_l2(F.solve(b), ref))
        skel.append(F.skeleton_total)
    assert errs[0] >= errs[1] >= errs[2]
    assert skel[0] <= skel[1] <= skel[2]


def test_solver_matches_dense_iso_inhomogeneous():
    g = Grid(16)
    med = Medium.gaussian(1.0)
    f = make_source("f2", g)
    ref = solve_dense(assemble_iso(g, med), f).u
    assert relative_l2(solve_rsf(g, med, f, 1e-8).u, ref) <= 100 * 1e-8


def test_solver_matches_dense_aniso():
    g = Grid(16)
    med, ph = gaussian_bump_anisotropic(1.0)
    f = make_source("f1", g)
    ref = solve_dense(assemble_aniso(g, med, ph, M3), f).u
    sol = solve_rsf(g, med, f, 1e-6, ph, M3)
    assert relative_l2(sol.u, ref) <= 100 * 1e-6
    assert sol.modal is not None


def test_homogeneous_matches_fft():
    g = Grid(32)
    f = make_source("f1", g)
    eps = 1e-6
    ref = solve_fft(build_symbol(g, CON), CON, f, KrylovConfig(tol=1e-12)).u
    assert relative_l2(solve_rsf(g, CON, f, eps).u, ref) <= 20 * eps


@pytest.mark.slow
def test_strong_bump_matches_dense():
    g = Grid(32)
    med = Medium.gaussian(10.0)
    f = make_source("f1", g)
    eps = 1e-6
    ref = solve_dense(assemble_iso(g, med), f).u
    assert relative_l2(solve_rsf(g, med, f, eps).u, ref) <= 100 * eps


def test_many_right_hand_sides_reuse_factorization():
    g = Grid(16)
    med = Medium.gaussian(5.0)
    s = RSFSolver(g, med, 1e-8)
    d = assemble_iso(g, med)
    for src in ("f1", "f2", "f3"):
        f = make_source(src, g)
        assert relative_l2(s.solve(f).u, solve_dense(d, f).u) <= 1e-6


def test_stats_csv(tmp_path):
    F = factorize(KERNELS["iso-var"], 1e-6, leaf_capacity=16)
    p = tmp_path / "stats.csv"
    F.write_stats_csv(p)
    rows = list(csv.DictReader(p.open()))
    assert list(rows[0]) == ["level", "boxes", "points_in", "skeletons", "bytes"]
    assert [int(r["level"]) for r in rows] == list(range(F.tree.depth - 1, -1, -1))
    assert int(rows[0]["points_in"]) == 256
    for r in rows:
        assert int(r["skeletons"]) <= int(r["points_in"]) and int(r["bytes"]) >= 0
    assert int(rows[-1]["bytes"]) > 0


def test_singular_pivot_raises():
    with pytest.raises(FactorizationError) as info:
        _factor_dense(np.zeros((3, 3)), False, 2, (1, 0))
    assert info.value.level == 2 and info.value.box == (1, 0)
    with pytest.raises(FactorizationError):
        _factor_dense(np.full((2, 2), np.nan), True, 1, (0, 0))


def test_bad_parameters():
    with pytest.raises(ValueError):
        factorize(KERNELS["iso-con"], 0.0)
    with pytest.raises(ValueError):
        ProxyRule(radius_factor=1.0)


def test_proxy_rings_enclose_box():
    tree = build_tree(Grid(16).centers, 16)
    box = tree.levels[2][5]
    pts, w = ProxyRule().points(box, 1 / 16)
    d = np.hypot(*(pts - box.center).T)
    assert np.all(d >= 1.5 * box.radius - 1e-12)
    assert np.all((pts >= 0) & (pts <= 1)) and np.all(w >= 1)
