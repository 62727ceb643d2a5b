"""Experiment configuration, source terms, error metrics, timing and the
table-reproduction presets."""

from __future__ import annotations

import csv
import io
import itertools
import os
import statistics
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .angular import ModeSet, select_modes
from .dense import DENSE_ROW_CAP, assemble_aniso, assemble_iso, solve_dense
from .exceptions import RTEError, UnsupportedBackendError
from .fft import KrylovConfig, build_symbol, solve_fft
from .geometry import Grid
from .medium import Medium, gaussian_bump_anisotropic, henyey_like_cosine
from .rsf import RSFSolver

PROBLEMS = ("iso", "aniso")
BACKENDS = ("dense", "fft", "rsf")
SOURCES = ("f1", "f2", "f3")

# source constants
T_WIDTH = 4e-3
C1 = (0.3, 0.7)
C2 = (0.7, 0.3)
C3 = (0.6, 0.4)
ANNULUS = (3.0 / 20.0, 0.25)
SQUARE = (0.5, 0.75)

REFERENCE_EPS = 1e-12
DENSE_REFERENCE_MAX_N = 32
DENSE_REFERENCE_MAX_SIZE = 4096


def source_function(source):
    """``f(x)`` for ``"f1"``/``"f2"``/``"f3"`` (or 1, 2, 3), vectorised over points."""
    key = str(source).lower().lstrip("f")
    if key == "1":
        def f(x):
            x = np.asarray(x, dtype=float)
            a = np.sum((x - np.asarray(C1)) ** 2, axis=-1)
            b = np.sum((x - np.asarray(C2)) ** 2, axis=-1)
            return (np.exp(-a / (2 * T_WIDTH)) + np.exp(-b / (2 * T_WIDTH))) / np.sqrt(2 * np.pi * T_WIDTH)
    elif key == "2":
        def f(x):
            r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(C3), axis=-1)
            return ((r >= ANNULUS[0]) & (r <= ANNULUS[1])).astype(float)
    elif key == "3":
        def f(x):
            x = np.asarray(x, dtype=float)
            inside = (x >= SQUARE[0]) & (x <= SQUARE[1])
            return np.all(inside, axis=-1).astype(float)
    else:
        raise ValueError(f"unknown source {source!r}; expected one of {SOURCES}")
    return f


def make_source(source, grid: Grid) -> np.ndarray:
    return source_function(source)(grid.centers)


def relative_l2(u, ref) -> float:
    u = np.asarray(u)
    ref = np.asarray(ref)
    den = np.linalg.norm(ref)
    num = np.linalg.norm(u - ref)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(num / den)


@dataclass
class RunConfig:
    """One solve.  ``rho=None`` means a homogeneous medium with ``mu_s`` and
    ``mu_t = mu_s + mu_a``; otherwise the Gaussian-bump profile with
    amplitude ``rho`` (and the bump phase function for ``aniso``)."""

    problem: str = "iso"
    backend: str = "fft"
    n: int = 32
    eps: float = 1e-6
    mu_s: float = 1.0
    mu_a: float = 0.2
    rho: float | None = None
    modes: tuple | None = None
    g: float = 0.2
    source: str = "f1"
    out_dir: str | None = None
    write_solution: bool = False
    plot: bool = False
    reference: str = "auto"
    seed: int = 0
    leaf_capacity: int = 64
    restart: int = 50
    maxiter: int = 10_000
    repeats: int = 3

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.n < 1 or not self.eps > 0:
            raise ValueError("need n >= 1 and eps > 0")
        if str(self.source).lower().lstrip("f") not in ("1", "2", "3"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.modes is not None:
            self.modes = tuple(int(k) for k in self.modes)
            if 0 not in self.modes:
                raise ValueError("the mode set must contain 0")
        if self.reference not in ("auto", "none", "dense", "fft", "rsf"):
            raise ValueError(f"unknown reference policy {self.reference!r}")
        if self.backend == "fft" and not self.homogeneous:
            raise UnsupportedBackendError("the fft backend needs a homogeneous medium (rho unset)")

    @property
    def homogeneous(self) -> bool:
        return self.rho is None or self.rho == 0

    @property
    def mode_set(self) -> ModeSet:
        """Retained modes: ``{0}`` for ``iso``, the explicit ``modes`` if given,
        otherwise every mode whose coefficient exceeds the selection threshold."""
        if self.problem == "iso":
            return ModeSet([0])
        if self.modes is not None:
            return ModeSet(self.modes)
        _, phase = medium_and_phase(self)
        return select_modes(phase, Grid(self.n).centers)

    def label(self) -> str:
        med = f"mus{self.mu_s:g}" if self.homogeneous else f"rho{self.rho:g}"
        return f"{self.problem}_{self.backend}_n{self.n}_eps{self.eps:.0e}_{med}_{self.source}"


@dataclass
class Problem:
    grid: Grid
    medium: Medium
    phase: object
    modes: ModeSet
    f: np.ndarray


def medium_and_phase(config: RunConfig):
    """The medium and (for ``aniso``) phase function a configuration describes."""
    if config.problem == "iso":
        if config.homogeneous:
            return Medium.constant(config.mu_s, config.mu_s + config.mu_a), None
        return Medium.gaussian(config.rho, config.mu_a), None
    if config.homogeneous:
        return Medium.constant(config.mu_s, config.mu_s + config.mu_a), henyey_like_cosine(config.g)
    return gaussian_bump_anisotropic(config.rho, config.mu_a)


def build_problem(config: RunConfig, source=None) -> Problem:
    grid = Grid(config.n)
    modes = config.mode_set
    medium, phase = medium_and_phase(config)
    f = make_source(config.source if source is None else source, grid)
    return Problem(grid, medium, phase, modes, f)


class _Prepared:
    """A backend after its precomputation, able to solve for any source."""

    def __init__(self, config: RunConfig, problem: Problem):
        self.config = config
        self.problem = problem
        p = problem
        if config.backend == "dense":
            if p.phase is None:
                self.system = assemble_iso(p.grid, p.medium)
            else:
                self.system = assemble_aniso(p.grid, p.medium, p.phase, p.modes)
            self.system.factor()
        elif config.backend == "fft":
            self.symbol = build_symbol(p.grid, p.medium, p.phase, p.modes)
            self.krylov = KrylovConfig(config.eps, config.maxiter, "auto", config.restart)
        else:
            self.solver = RSFSolver(p.grid, p.medium, config.eps, p.phase, p.modes,
                                    leaf_capacity=config.leaf_capacity)

    def solve(self, f):
        """Return ``(u, iterations)``; ``u`` is the modal vector for ``aniso``."""
        b = self.config.backend
        if b == "dense":
            return solve_dense(self.system, f).u, 0
        if b == "fft":
            s = solve_fft(self.symbol, self.problem.medium, f, self.krylov)
            return s.u, s.iterations
        return self.solver.solve(f).u, 0

    @property
    def skeletons(self):
        if self.config.backend == "rsf":
            return self.solver.factorization.skeleton_total
        return None


def prepare(config: RunConfig, problem: Problem | None = None):
    """Precompute a backend; returns ``(prepared, T_pre)``."""
    problem = problem or build_problem(config)
    t0 = time.perf_counter()
    prep = _Prepared(config, problem)
    return prep, time.perf_counter() - t0


def reference_kind(config: RunConfig) -> str | None:
    """Which backend supplies the reference solution.

    Dense for ``n <= 32``; above that the fft backend at a tight tolerance
    for homogeneous media, and for inhomogeneous media dense while the
    system has at most 4096 rows, the rsf backend at a tight tolerance
    beyond.
    """
    if config.reference == "none":
        return None
    if config.reference != "auto":
        return config.reference
    size = config.n ** 2 * config.mode_set.M
    if config.n <= DENSE_REFERENCE_MAX_N:
        return "dense"
    if config.homogeneous:
        return "fft"
    if size <= DENSE_REFERENCE_MAX_SIZE:
        return "dense"
    return "rsf"


class ReferenceCache:
    """Reference solvers shared across runs of one sweep."""

    def __init__(self):
        self._solvers = {}
        self._solutions = {}

    def _key(self, config: RunConfig, kind: str):
        return (kind, config.problem, config.n, config.mu_s, config.mu_a, config.rho, config.mode_set.modes,
                config.g)

    def get(self, config: RunConfig, source=None):
        kind = reference_kind(config)
        if kind is None:
            return None, None
        source = config.source if source is None else source
        key = self._key(config, kind)
        if (key, source) in self._solutions:
            return self._solutions[(key, source)], kind
        if key not in self._solvers:
            if kind == "dense" and config.n ** 2 * config.mode_set.M > DENSE_ROW_CAP:
                raise ValueError("system too large for a dense reference")
            ref_cfg = replace(config, backend=kind, eps=REFERENCE_EPS, reference="none", out_dir=None,
                              write_solution=False, plot=False)
            self._solvers[key] = prepare(ref_cfg)[0]
        prep = self._solvers[key]
        f = make_source(source, prep.problem.grid)
        u = prep.solve(f)[0]
        self._solutions[(key, source)] = u
        return u, kind


@dataclass
class RunResult:
    config: RunConfig
    u: np.ndarray
    T_pre: float
    T_sol: float
    iterations: int
    error: float | None
    reference: str | None
    skeletons: int | None = None
    files: dict = field(default_factory=dict)

    def row(self) -> dict:
        c = self.config
        return {
            "problem": c.problem, "backend": c.backend, "n": c.n, "N": c.n * c.n, "M": c.mode_set.M,
            "eps": c.eps, "mu_s": c.mu_s if c.homogeneous else "", "mu_a": c.mu_a,
            "rho": "" if c.rho is None else c.rho, "modes": " ".join(map(str, c.mode_set.modes)),
            "source": c.source, "T_pre": self.T_pre, "T_sol": self.T_sol, "iterations": self.iterations,
            "skeletons": "" if self.skeletons is None else self.skeletons,
            "error": "" if self.error is None else self.error, "reference": self.reference or "",
            "cores": os.cpu_count() or 1, "status": "ok",
        }


def _timed_solves(prep, f, repeats: int):
    times = []
    u = it = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        u, it = prep.solve(f)
        times.append(time.perf_counter() - t0)
    return u, it, statistics.median(times)


def run_sources(config: RunConfig, sources, refs: ReferenceCache | None = None) -> list:
    """Precompute once, then solve for each source.  ``T_pre`` is shared."""
    refs = refs if refs is not None else ReferenceCache()
    problem = build_problem(config)
    prep, t_pre = prepare(config, problem)
    out = []
    for src in sources:
        cfg = replace(config, source=src)
        f = make_source(src, problem.grid)
        u, it, t_sol = _timed_solves(prep, f, config.repeats)
        ref, kind = refs.get(cfg)
        err = relative_l2(u, ref) if ref is not None else None
        res = RunResult(cfg, u, t_pre, t_sol, it, err, kind, prep.skeletons)
        if cfg.out_dir:
            res.files = write_outputs(res, problem)
        out.append(res)
    return out


def run(config: RunConfig, refs: ReferenceCache | None = None) -> RunResult:
    return run_sources(config, [config.source], refs)[0]


# ---------------------------------------------------------------------------
# output


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(rows, columns=None) -> str:
    rows = list(rows)
    if columns is None:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in columns})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def solution_csv(grid: Grid, u, modes: ModeSet | None = None) -> str:
    """``i1,i2,x1,x2,u`` for densities; ``i1,i2,x1,x2,k,re,im`` for modal data."""
    n = grid.n
    i = np.arange(grid.N)
    i1, i2 = i % n, i // n
    x = np.asarray(grid.centers, dtype=float).tolist()
    xs1 = [p[0] for p in x]
    xs2 = [p[1] for p in x]
    lines = []
    if modes is None:
        lines.append("i1,i2,x1,x2,u")
        for a, b, p, q, v in zip(i1.tolist(), i2.tolist(), xs1, xs2, np.asarray(u, dtype=float).tolist()):
            lines.append(f"{a},{b},{p!r},{q!r},{v!r}")
    else:
        lines.append("i1,i2,x1,x2,k,re,im")
        vals = np.asarray(u).reshape(modes.M, grid.N)
        for m, k in enumerate(modes):
            for a, b, p, q, v in zip(i1.tolist(), i2.tolist(), xs1, xs2, vals[m].tolist()):
                lines.append(f"{a},{b},{p!r},{q!r},{k},{complex(v).real!r},{complex(v).imag!r}")
    return "\n".join(lines) + "\n"


def plot_solution(grid: Grid, density, path, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = grid.n
    t = (np.arange(n) + 0.5) * grid.h
    fig, ax = plt.subplots(figsize=(5, 4))
    cs = ax.contourf(t, t, np.asarray(density, dtype=float).reshape(n, n), levels=30)
    fig.colorbar(cs, ax=ax)
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp.png")
    fig.savefig(tmp, dpi=100)
    plt.close(fig)
    os.replace(tmp, path)


def write_outputs(res: RunResult, problem: Problem) -> dict:
    c = res.config
    out = Path(c.out_dir)
    files = {}
    modes = problem.modes if problem.phase is not None else None
    if c.write_solution:
        p = out / f"solution_{c.label()}.csv"
        atomic_write(p, solution_csv(problem.grid, res.u, modes))
        files["solution"] = str(p)
    p = out / f"report_{c.label()}.csv"
    atomic_write(p, csv_text([res.row()]))
    files["report"] = str(p)
    if c.plot:
        dens = res.u if modes is None else np.asarray(res.u).reshape(modes.M, -1)[modes.position(0)].real
        p = out / f"solution_{c.label()}.png"
        plot_solution(problem.grid, dens, p, c.label())
        files["plot"] = str(p)
    return files


# ---------------------------------------------------------------------------
# sweeps


def sweep(template: RunConfig, axes: dict, path=None, refs: ReferenceCache | None = None) -> list:
    """One row per combination of ``axes`` (field name -> values).

    A failing combination is recorded with its error message and the sweep
    moves on.
    """
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ValueError("every sweep axis needs at least one value")
    names = [f.name for f in fields(RunConfig)]
    for k in axes:
        if k not in names:
            raise ValueError(f"unknown sweep axis {k!r}")
    refs = refs if refs is not None else ReferenceCache()
    rows = []
    keys = list(axes)
    for combo in itertools.product(*(axes[k] for k in keys)):
        params = dict(zip(keys, combo))
        try:
            cfg = replace(template, **params)
            rows.append(run(cfg, refs).row())
        except (RTEError, ValueError, np.linalg.LinAlgError, MemoryError) as exc:
            row = {k: (v if not isinstance(v, tuple) else " ".join(map(str, v))) for k, v in params.items()}
            row.update(status=f"error: {type(exc).__name__}: {exc}")
            rows.append(row)
    if path is not None:
        atomic_write(path, csv_text(rows, _sweep_columns(rows)))
    return rows


def _sweep_columns(rows):
    base = list(RunResult(RunConfig(), np.zeros(0), 0, 0, 0, None, None).row())
    extra = [k for r in rows for k in r if k not in base]
    return base + list(dict.fromkeys(extra))


# ---------------------------------------------------------------------------
# table presets

_TAG = {"dense": "DIR", "fft": "FFT", "rsf": "RSF"}


@dataclass(frozen=True)
class Preset:
    """Layout of one results table.

    ``kind`` is ``"time"`` (precompute and solve times per backend),
    ``"err"`` (errors per source and backend) or ``"mus"`` (times and error
    as the scattering strength varies along ``row_axis``).
    """

    name: str
    problem: str
    homogeneous: bool
    kind: str
    backends: tuple
    row_axis: str
    row_values: tuple
    eps_values: tuple = (1e-4, 1e-6, 1e-8)
    n: int | None = None
    sources: tuple = ("f1",)

    def columns(self) -> list:
        cols = [self.row_axis, "eps"]
        tags = [_TAG[b] for b in self.backends]
        if self.kind in ("time", "mus"):
            cols += [f"T_pre_{t}" for t in tags] + [f"T_sol_{t}" for t in tags]
        if self.kind == "err":
            cols += [f"E{s.lstrip('f')}_{t}" for s in self.sources for t in tags]
        if self.kind == "mus":
            cols += [f"E_{t}" for t in tags]
        return cols


PRESETS = {p.name: p for p in [
    Preset("table-iso-con-time", "iso", True, "time", ("dense", "fft", "rsf"), "n", (16, 32, 64)),
    Preset("table-iso-con-err", "iso", True, "err", ("fft", "rsf"), "n", (32, 64, 128), sources=SOURCES),
    Preset("table-iso-con-mus", "iso", True, "mus", ("fft", "rsf"), "mu_s", (1.0, 5.0, 10.0), n=64),
    Preset("table-iso-var-time", "iso", False, "time", ("dense", "rsf"), "n", (16, 32, 64)),
    Preset("table-iso-var-err", "iso", False, "err", ("rsf",), "n", (32, 64), sources=SOURCES),
    Preset("table-iso-var-mus", "iso", False, "mus", ("rsf",), "rho", (1.0, 5.0, 10.0), n=64),
    Preset("table-ani-con-time", "aniso", True, "time", ("dense", "fft", "rsf"), "n", (16, 32)),
    Preset("table-ani-con-err", "aniso", True, "err", ("fft", "rsf"), "n", (16, 32), sources=SOURCES),
    Preset("table-ani-con-mus", "aniso", True, "mus", ("fft", "rsf"), "mu_s", (1.0, 5.0, 10.0), n=32),
    Preset("table-ani-var-time", "aniso", False, "time", ("dense", "rsf"), "n", (16, 32)),
    Preset("table-ani-var-err", "aniso", False, "err", ("rsf",), "n", (16, 32), sources=SOURCES),
    Preset("table-ani-var-mus", "aniso", False, "mus", ("rsf",), "rho", (1.0, 5.0, 10.0), n=64),
]}


def repro(name: str, out_dir=None, row_values=None, eps_values=None, n: int | None = None,
          template: RunConfig | None = None) -> list:
    """Run a preset and return (and optionally write) its table rows.

    ``row_values``, ``eps_values`` and ``n`` override the preset's defaults,
    e.g. to run a table at desk scale.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    rows_axis = tuple(row_values) if row_values is not None else p.row_values
    eps_axis = tuple(eps_values) if eps_values is not None else p.eps_values
    base = template or RunConfig()
    base = replace(base, problem=p.problem, backend=p.backends[0], rho=None if p.homogeneous else 1.0, out_dir=None,
                   reference="none" if p.kind == "time" else "auto")
    if p.n is not None or n is not None:
        base = replace(base, n=n if n is not None else p.n)
    refs = ReferenceCache()
    table = []
    for eps in eps_axis:
        for rv in rows_axis:
            row = {p.row_axis: rv, "eps": eps}
            for b in p.backends:
                tag = _TAG[b]
                cfg = replace(base, backend=b, eps=eps, **{p.row_axis: rv})
                if p.row_axis == "mu_s":
                    cfg = replace(cfg, mu_s=float(rv))
                if b == "dense" and cfg.n ** 2 * cfg.mode_set.M > DENSE_ROW_CAP:
                    row[f"T_pre_{tag}"] = row[f"T_sol_{tag}"] = ""
                    continue
                try:
                    results = run_sources(cfg, p.sources, refs)
                except (RTEError, ValueError, MemoryError) as exc:
                    row.setdefault("status", "")
                    row["status"] += f"{tag}: {type(exc).__name__}: {exc}; "
                    continue
                row[f"T_pre_{tag}"] = results[0].T_pre
                row[f"T_sol_{tag}"] = statistics.median(r.T_sol for r in results)
                for r in results:
                    e = "" if r.error is None else r.error
                    if p.kind == "err":
                        row[f"E{r.config.source.lstrip('f')}_{tag}"] = e
                    elif p.kind == "mus":
                        row[f"E_{tag}"] = e
            table.append(row)
    cols = p.columns() + (["status"] if any("status" in r for r in table) else [])
    if out_dir is not None:
        atomic_write(Path(out_dir) / f"{name}.csv", csv_text(table, cols))
    return table


def config_to_dict(config: RunConfig) -> dict:
    return asdict(config)
