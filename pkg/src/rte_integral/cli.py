"""Command-line front end.

Subcommands: ``solve``, ``sweep``, ``check`` and ``repro <preset>``.
Exit codes: 0 success, 1 usage error, 2 Krylov non-convergence,
3 factorization failure, 4 a diagnostic check failed.
"""

from __future__ import annotations

import argparse
import sys
import itertools
from dataclasses import fields, replace
from pathlib import Path

from . import harness
from .diagnostics import analyze, write_reports_csv, write_reports_jsonl
from .exceptions import ConvergenceError, FactorizationError, RTEError, SingularSystemError

EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_FACTORIZATION, EXIT_CHECK = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys act as underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


_FIELD_TYPES = {f.name: f.type for f in fields(harness.RunConfig)}


def _convert(key: str, value):
    if key not in _FIELD_TYPES:
        raise UsageError(f"unknown configuration key {key!r}")
    if not isinstance(value, str):
        return value
    t = str(_FIELD_TYPES[key])
    v = value.strip()
    try:
        if key == "modes":
            return None if v.lower() in ("", "none") else tuple(int(x) for x in v.replace(" ", "").split(","))
        if key == "rho":
            return None if v.lower() in ("", "none") else float(v)
        if key == "out_dir":
            return None if v.lower() in ("", "none") else v
        if t.startswith("bool"):
            if v.lower() in ("1", "true", "yes", "on"):
                return True
            if v.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(v)
        if t.startswith("int"):
            return int(v)
        if t.startswith("float"):
            return float(v)
    except ValueError:
        raise UsageError(f"bad value {value!r} for {key}") from None
    return v


def _list(text: str, cast):
    try:
        return [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad list {text!r}") from None


def _add_common(p):
    p.add_argument("--config", help="flat key = value file; flags override its keys")
    p.add_argument("--problem", choices=harness.PROBLEMS)
    p.add_argument("--source", help="f1, f2 or f3")
    p.add_argument("--mu-a", dest="mu_a")
    p.add_argument("--modes", help="comma-separated mode list, e.g. -1,0,1")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--leaf-capacity", dest="leaf_capacity")
    p.add_argument("--restart")
    p.add_argument("--maxiter")
    p.add_argument("--repeats")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rte-integral", description="Integral-equation RTE solvers (dense, fft, rsf).")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve", help="run one configuration")
    _add_common(s)
    s.add_argument("--backend")
    s.add_argument("--n")
    s.add_argument("--eps")
    s.add_argument("--mu-s", dest="mu_s")
    s.add_argument("--rho")
    s.add_argument("--reference", choices=("auto", "none", "dense", "fft", "rsf"))
    s.add_argument("--no-solution", action="store_true", help="skip the solution CSV")
    s.add_argument("--plot", action="store_true", help="also write a PNG contour plot")

    w = sub.add_parser("sweep", help="run every combination of comma-separated values")
    _add_common(w)
    w.add_argument("--backend", help="comma list")
    w.add_argument("--n", help="comma list")
    w.add_argument("--eps", help="comma list")
    w.add_argument("--mu-s", dest="mu_s", help="comma list")
    w.add_argument("--rho", help="comma list")
    w.add_argument("--output", help="table CSV path (default <out-dir>/sweep.csv)")

    c = sub.add_parser("check", help="run the analytic diagnostics on a configuration")
    _add_common(c)
    c.add_argument("--n", help="comma list")
    c.add_argument("--mu-s", dest="mu_s", help="comma list")
    c.add_argument("--rho", help="comma list")
    c.add_argument("--eps", help=argparse.SUPPRESS)

    r = sub.add_parser("repro", help="emit one of the results tables")
    r.add_argument("preset", help=", ".join(sorted(harness.PRESETS)))
    r.add_argument("--n", help="comma list of table rows (or the fixed n for the mu_s/rho tables)")
    r.add_argument("--eps", help="comma list")
    r.add_argument("--mu-s", dest="mu_s", help="comma list of mu_s rows")
    r.add_argument("--rho", help="comma list of rho rows")
    r.add_argument("--backend", help=argparse.SUPPRESS)
    r.add_argument("--source", help=argparse.SUPPRESS)
    r.add_argument("--mu-a", dest="mu_a")
    r.add_argument("--modes", help=argparse.SUPPRESS)
    r.add_argument("--out-dir", dest="out_dir", default=".")
    return ap


_SCALAR_KEYS = ("problem", "source", "mu_a", "modes", "out_dir", "leaf_capacity", "restart", "maxiter", "repeats",
                "backend", "n", "eps", "mu_s", "rho", "reference")


def _base_config(args, list_keys=(), force=None) -> tuple[harness.RunConfig, dict]:
    """Merge the config file and flags; ``list_keys`` are returned separately as axes."""
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for k in _SCALAR_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    values.update(force or {})
    axes = {}
    for k in list_keys:
        if k in values and isinstance(values[k], str) and "," in values[k]:
            cast = {"n": int, "eps": float, "mu_s": float, "rho": float, "backend": str}[k]
            axes[k] = _list(values.pop(k), cast)
        elif k in values:
            axes[k] = [_convert(k, values.pop(k))]
    kwargs = {k: _convert(k, v) for k, v in values.items()}
    try:
        cfg = harness.RunConfig(**kwargs)
    except (TypeError, ValueError, RTEError) as exc:
        raise UsageError(str(exc)) from None
    return cfg, axes


def _cmd_solve(args) -> int:
    cfg, _ = _base_config(args)
    cfg = replace(cfg, write_solution=not args.no_solution, plot=args.plot or cfg.plot,
                  out_dir=cfg.out_dir or ".")
    res = harness.run(cfg)
    err = "n/a" if res.error is None else f"{res.error:.3e} (vs {res.reference})"
    print(f"{cfg.label()}: T_pre={res.T_pre:.3e}s T_sol={res.T_sol:.3e}s iterations={res.iterations} error={err}")
    for kind, path in res.files.items():
        print(f"  {kind}: {path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg, axes = _base_config(args, ("backend", "n", "eps", "mu_s", "rho"))
    if not axes:
        raise UsageError("give at least one of --n, --eps, --mu-s, --rho, --backend")
    out = Path(args.output) if args.output else Path(cfg.out_dir or ".") / "sweep.csv"
    try:
        # validate each axis value early so a typo is a usage error
        for k, vals in axes.items():
            for v in vals:
                if k == "backend" and v not in harness.BACKENDS:
                    raise ValueError(f"unknown backend {v!r}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = harness.sweep(replace(cfg, out_dir=None), axes, out)
    failed = sum(1 for r in rows if r.get("status") != "ok")
    print(f"{len(rows)} rows written to {out} ({failed} failed)")
    return EXIT_OK


def _cmd_check(args) -> int:
    # diagnostics always go through the dense assembly
    cfg, axes = _base_config(args, ("n", "mu_s", "rho"), force={"backend": "dense"})
    combos = [dict(zip(axes, vals)) for vals in itertools.product(*axes.values())] or [{}]
    reports = []
    for params in combos:
        c = replace(cfg, **params)
        if c.n ** 2 * c.mode_set.M > 4096:
            raise UsageError("check assembles dense matrices; keep n^2 * #modes <= 4096")
        p = harness.build_problem(c)
        reports.append(analyze(p.grid, p.medium, p.f, p.phase, p.modes, label=c.label()))
    out = Path(cfg.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_reports_csv(reports, out / "check.csv")
    write_reports_jsonl(reports, out / "check.jsonl")
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.label}: C={r.C:.5f} max_row_sum="
              f"{'n/a' if r.max_row_sum is None else f'{r.max_row_sum:.5f}'} min_eig={r.min_eig:.4e} "
              f"richardson_ratio={r.richardson_ratio if r.richardson_ratio is None else round(r.richardson_ratio, 5)}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def _cmd_repro(args) -> int:
    if args.preset not in harness.PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(harness.PRESETS))}")
    p = harness.PRESETS[args.preset]
    rows = None
    n = None
    if args.n:
        ns = _list(args.n, int)
        if p.row_axis == "n":
            rows = ns
        else:
            n = ns[0]
    if args.mu_s and p.row_axis == "mu_s":
        rows = _list(args.mu_s, float)
    if args.rho and p.row_axis == "rho":
        rows = _list(args.rho, float)
    eps = _list(args.eps, float) if args.eps else None
    template = harness.RunConfig(mu_a=float(args.mu_a)) if args.mu_a else None
    table = harness.repro(args.preset, args.out_dir, rows, eps, n, template)
    print(f"{args.preset}: {len(table)} rows written to {Path(args.out_dir) / (args.preset + '.csv')}")
    cols = p.columns()
    print(",".join(cols))
    for r in table:
        print(",".join(_short(r.get(c, "")) for c in cols))
    return EXIT_OK


def _short(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _glue_values(argv):
    """``--modes -1,0,1`` would read ``-1,0,1`` as an option; glue it on with ``=``."""
    out = []
    it = iter(argv)
    for a in it:
        if a == "--modes":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--modes={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_values(sys.argv[1:] if argv is None else list(argv)))
    handlers = {"solve": _cmd_solve, "sweep": _cmd_sweep, "check": _cmd_check, "repro": _cmd_repro}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"rte-integral: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"rte-integral: {exc} (last residual {exc.history[-1] if exc.history else float('nan'):.3e})",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    except (FactorizationError, SingularSystemError) as exc:
        print(f"rte-integral: factorization failed: {exc}", file=sys.stderr)
        return EXIT_FACTORIZATION
    except (RTEError, ValueError) as exc:
        print(f"rte-integral: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
