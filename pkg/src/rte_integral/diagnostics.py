"""Runtime checks of the analytic properties: contraction of ``K``, positive
definiteness of the system, the a priori bound and Richardson convergence."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .angular import ISOTROPIC_MODES, ModeSet
from .dense import DenseSystem, apriori_check, assemble_aniso, assemble_iso, richardson, solve_dense
from .geometry import UNIT_SQUARE, Domain, Grid
from .medium import Medium, PhaseFunction

ROW_SUM_SLACK = 0.02
RICHARDSON_SLACK = 0.02
SPD_MAX_SIZE = 4096


def mu_s_sup(medium: Medium, points=None, resolution: int = 257) -> float:
    """``||mu_s||_inf`` over ``points``, or over a vertex lattice of the unit square."""
    if medium.homogeneous:
        return float(medium.mu_s_value)
    if points is None:
        t = np.linspace(0.0, 1.0, resolution)
        points = np.stack(np.meshgrid(t, t, indexing="xy"), axis=-1).reshape(-1, 2)
    return medium.mu_s_sup(points)


def contraction_constant(medium: Medium, domain: Domain = UNIT_SQUARE, points=None) -> float:
    """``C = 1 - exp(-tau ||mu_s||_inf)`` with ``tau`` the domain diameter."""
    return float(-np.expm1(-domain.max_exit_distance * mu_s_sup(medium, points)))


@dataclass
class RowSumResult:
    max_row_sum: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.max_row_sum <= self.bound


def row_sum_check(K, C: float, slack: float = ROW_SUM_SLACK) -> RowSumResult:
    """Largest row sum of the (nonnegative) isotropic ``K`` against ``C (1 + slack)``."""
    K = np.asarray(K)
    rs = float(np.max(np.sum(K, axis=1))) if K.size else 0.0
    return RowSumResult(rs, C * (1.0 + slack))


def spd_probe(A, max_size: int = SPD_MAX_SIZE) -> float:
    """Smallest eigenvalue of the Hermitian part ``(A + A^H)/2``."""
    A = np.asarray(A)
    if A.shape[0] > max_size:
        raise ValueError(f"matrix of size {A.shape[0]} exceeds the probe limit {max_size}")
    H = 0.5 * (A + A.conj().T)
    return float(np.linalg.eigvalsh(H)[0])


@dataclass
class AnalysisReport:
    label: str
    n: int
    modes: str
    mu_s_sup: float
    C: float
    tau: float
    max_row_sum: float | None
    row_sum_bound: float | None
    min_eig: float | None
    spd_min_eig_bound: float | None
    apriori: dict = field(default_factory=dict)  # p -> (norm_u, bound)
    richardson_ratio: float | None = None
    richardson_error: float | None = None

    @property
    def row_sum_ok(self) -> bool:
        return self.max_row_sum is None or self.max_row_sum <= self.row_sum_bound

    @property
    def spd_ok(self) -> bool:
        return self.min_eig is None or self.min_eig > 0.0

    @property
    def apriori_ok(self) -> bool:
        return all(u <= b for u, b in self.apriori.values())

    @property
    def richardson_ok(self) -> bool:
        if self.richardson_ratio is None:
            return True
        return self.richardson_ratio <= self.C + RICHARDSON_SLACK

    @property
    def passed(self) -> bool:
        return self.row_sum_ok and self.spd_ok and self.apriori_ok and self.richardson_ok

    def to_row(self) -> dict:
        row = {k: v for k, v in asdict(self).items() if k != "apriori"}
        for p, (u, b) in self.apriori.items():
            row[f"norm_u_p{p}"] = u
            row[f"apriori_bound_p{p}"] = b
        row.update(row_sum_ok=self.row_sum_ok, spd_ok=self.spd_ok, apriori_ok=self.apriori_ok,
                   richardson_ok=self.richardson_ok, passed=self.passed)
        return row


def _richardson_ratio(ratios: np.ndarray) -> float | None:
    """Asymptotic contraction ratio: the median of the last quarter of the update ratios."""
    if ratios.size == 0:
        return None
    tail = ratios[-max(1, ratios.size // 4):]
    return float(np.median(tail))


def analyze(grid: Grid, medium: Medium, f, phase: PhaseFunction | None = None,
            modes: ModeSet = ISOTROPIC_MODES, label: str = "", system: DenseSystem | None = None,
            norms=(2, np.inf), run_richardson: bool = True) -> AnalysisReport:
    """Run every check on one configuration through a dense assembly."""
    f = np.asarray(f, dtype=float)
    if system is None:
        if phase is None:
            system = assemble_iso(grid, medium)
        else:
            system = assemble_aniso(grid, medium, phase, modes)
    sup = mu_s_sup(medium)
    C = contraction_constant(medium)
    tau = UNIT_SQUARE.max_exit_distance
    if phase is None:
        rs = row_sum_check(system.K, C)
        max_rs, rs_bound = rs.max_row_sum, rs.bound
        if system.form == "symmetric":
            # congruent to A and similar to I - K, so its spectrum is bounded below by 1 - C
            s = np.sqrt(system.kernel.mu_s)
            probe = system.A * s[:, None] * s[None, :]
        else:
            probe = system.A
    else:
        max_rs = rs_bound = None
        probe = system.A
    min_eig = spd_probe(probe) if probe.shape[0] <= SPD_MAX_SIZE else None
    sol = solve_dense(system, f)
    u = sol.u if phase is None else sol.u.reshape(modes.M, grid.N)
    apr = {}
    for p in norms:
        r = apriori_check(u, f, sup, p, grid.volume, tau)
        key = "inf" if p in (np.inf, "inf") else str(int(p))
        apr[key] = (r.norm_u, r.bound)
    ratio = err = None
    if run_richardson:
        ur, ratios = richardson(system, f, tol=1e-13)
        ratio = _richardson_ratio(ratios)
        err = float(np.linalg.norm(ur - sol.u) / max(np.linalg.norm(sol.u), 1e-300))
    return AnalysisReport(label, grid.n, ",".join(str(k) for k in modes), sup, C, tau, max_rs, rs_bound,
                          min_eig, 1.0 - C, apr, ratio, err)


def write_reports_csv(reports, path) -> None:
    rows = [r.to_row() for r in reports]
    keys = list(dict.fromkeys(k for row in rows for k in row))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in keys})


def write_reports_jsonl(reports, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_row(), default=float) + "\n")
