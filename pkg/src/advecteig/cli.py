"""Command-line driver: ``advecteig <subcommand> --config run.ini``.

Exit codes: 0 ok, 1 validation failure, 2 solver failure, 3 acceptance failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (GridParams, alpha_ladder, default_window, prepare, rate_reports,
                          refinement_check, sweep)
from .corrections import FredholmError, StagnationError
from .eigensolver import EigenSolverError
from .limiting import TruncationError, solve_limit
from .model import DomainSpec, GSpec, HomogeneousV, Scenario, SmoothV, validate_scenario

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 1, 2, 3
SUBCOMMANDS = ("limit", "corrections", "sweep", "verify", "report")
# reported but not fatal: refined mode is allowed outside the proven range of p
ADVISORY = ("p outside {2}∪(3,∞) for refined mode",)

DEFAULTS = {
    "scenario": {"dim": "1", "epsilon": "1.0", "beta": "0.0", "s": "8.0", "mode": "leading",
                 "v_kind": "smooth", "v_terms": "", "q_hat": "1.0", "c_h": "1.0", "q_matrix": "",
                 "domain": "2.0"},
    "grid": {"node_count": "511", "radius": "auto", "tol": "1e-13", "tail_tol": "1e-10", "inner": "auto"},
    "sweep": {"alpha_min": "100", "alpha_max": "10000", "points_per_decade": "4"},
    "output": {"dir": "out", "formats": "csv,json"},
}
REQUIRED = {"scenario": ("p", "c0")}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: Scenario
    grid: GridParams
    alpha_min: float
    alpha_max: float
    points_per_decade: int
    out_dir: Path
    formats: tuple[str, ...] = ("csv", "json")
    warnings: list = field(default_factory=list)

    def alphas(self) -> list[float]:
        if self.alpha_min > self.alpha_max:
            return []
        return alpha_ladder(self.alpha_min, self.alpha_max, self.points_per_decade)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def parse_v_terms(text: str, dim: int) -> SmoothV:
    """``"0:1; 1:1; 2:1"`` -> 1 + x + x^2; multi-indices use commas in N > 1 (``"1,0:2"``)."""
    terms = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"v_terms entry {chunk!r} is not of the form sigma:coef")
        sig, coef = chunk.split(":", 1)
        sigma = tuple(int(v) for v in sig.replace(",", " ").split())
        if len(sigma) != dim:
            raise ConfigError(f"multi-index {sigma} does not match dim={dim}")
        terms.append((sigma, float(coef)))
    if not terms:
        terms = [((0,) * dim, 0.0)]
    return SmoothV.from_terms(terms, dim)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.read_dict(DEFAULTS)
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    for sec, keys in REQUIRED.items():
        for k in keys:
            if not cp.has_option(sec, k):
                raise ConfigError(f"[{sec}] {k} is required")
    for sec, vals in (overrides or {}).items():
        for k, v in vals.items():
            if v is not None:
                cp.set(sec, k, str(v))
    try:
        sc = cp["scenario"]
        dim = sc.getint("dim")
        if dim < 1:
            raise ConfigError("dim must be a positive integer")
        g = GSpec(sc.getfloat("c0"), sc.getfloat("beta"), sc.getfloat("s"))
        kind = sc.get("v_kind").strip()
        if kind == "smooth":
            v = parse_v_terms(sc.get("v_terms"), dim)
        elif kind == "homogeneous":
            qm = _floats(sc.get("q_matrix"))
            Q = tuple(qm) if qm else tuple(np.eye(dim).ravel())
            if len(Q) != dim * dim:
                raise ConfigError(f"q_matrix needs {dim * dim} entries")
            v = HomogeneousV(sc.getfloat("c_h"), sc.getfloat("q_hat"), Q)
        else:
            raise ConfigError(f"v_kind must be smooth or homogeneous, got {kind!r}")
        dom = _floats(sc.get("domain"))
        if len(dom) == 1:
            dom = dom * dim
        s = Scenario(dim, sc.getfloat("epsilon"), sc.getfloat("p"), g, v, DomainSpec(tuple(dom)),
                     sc.get("mode").strip())
        gr = cp["grid"]
        radius = gr.get("radius").strip().lower()
        params = GridParams(gr.getint("node_count"), None if radius == "auto" else float(radius),
                            gr.getfloat("tol"), gr.get("inner").strip(), gr.getfloat("tail_tol"))
        sw = cp["sweep"]
        out = cp["output"]
        cfg = RunConfig(s, params, sw.getfloat("alpha_min"), sw.getfloat("alpha_max"),
                        sw.getint("points_per_decade"), Path(out.get("dir")),
                        tuple(f.strip() for f in out.get("formats").split(",") if f.strip()))
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    problems = validate_scenario(s)
    cfg.warnings = [m for m in problems if m in ADVISORY]
    fatal = [m for m in problems if m not in ADVISORY]
    if params.node_count < 3:
        fatal.append("node_count must be at least 3")
    if params.inner not in ("auto", "direct", "cg"):
        fatal.append(f"unknown inner solver {params.inner!r}")
    if not (cfg.alpha_min > 0 and cfg.alpha_max > 0) or cfg.points_per_decade < 1:
        fatal.append("sweep needs alpha_min, alpha_max > 0 and points_per_decade >= 1")
    if fatal:
        raise ConfigError("; ".join(fatal))
    return cfg


# ---- serialization -------------------------------------------------------

def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + ",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ConfigError(f"{path} lacks the '#' header line")
        header = [h.strip() for h in first[1:].split(",")]
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return header, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def update_summary(out_dir: Path, section: str, payload: dict) -> Path:
    path = out_dir / "summary.json"
    data = {}
    if path.exists():
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            data = {}
    data[section] = _jsonable(payload)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _coord_names(dim):
    return ["x"] if dim == 1 else [f"x{i + 1}" for i in range(dim)]


# ---- subcommands ----------------------------------------------------------

def cmd_limit(cfg: RunConfig, args) -> int:
    p = cfg.grid
    lim = solve_limit(cfg.scenario, p.node_count, p.radius, p.tail_tol, tol=p.tol, inner=p.inner)
    g = lim.grid
    pts = g.points.reshape(-1, g.dim)
    if "csv" in cfg.formats:
        write_csv(cfg.out_dir / "limit.csv", _coord_names(g.dim) + ["r", "u_hat"],
                  np.column_stack([pts, g.radius.ravel(), lim.u_hat.values.ravel()]))
    payload = {"lambda_hat": lim.lambda_hat, "radius": lim.radius, "node_count": list(g.counts),
               "spacing": list(g.spacing), "checks": lim.checks, "iterations": lim.eig.stats.iterations,
               "residual": lim.eig.stats.residual, "warnings": cfg.warnings}
    if "json" in cfg.formats:
        update_summary(cfg.out_dir, "limit", payload)
    print(f"lambda_hat = {fmt(lim.lambda_hat)}  (R = {lim.radius:g}, n = {g.counts[0]})")
    return EXIT_OK


def cmd_corrections(cfg: RunConfig, args) -> int:
    if cfg.scenario.mode == "leading":
        print("error: corrections need mode smooth_refined or homogeneous_refined", file=sys.stderr)
        return EXIT_INVALID
    lim, corr, co = prepare(cfg.scenario, cfg.grid)
    g = lim.grid
    pts = g.points.reshape(-1, g.dim)
    if "csv" in cfg.formats:
        cols = [pts, lim.u_hat.values.ravel()] + [corr[i].values.ravel() for i in corr.which]
        write_csv(cfg.out_dir / "corrections.csv",
                  _coord_names(g.dim) + ["u_hat"] + [f"psi_{i}" for i in corr.which], np.column_stack(cols))
    payload = {"coefficients": co.as_dict(), "fredholm_defects": corr.fredholm_defects,
               "residuals": corr.residuals, "warnings": cfg.warnings}
    if "json" in cfg.formats:
        update_summary(cfg.out_dir, "corrections", payload)
    for k, v in co.as_dict().items():
        if k != "exponents":
            print(f"{k} = {v if isinstance(v, str) else fmt(v) if v is not None else 'n/a'}")
    return EXIT_OK


def sweep_header(K: int) -> list[str]:
    cols = ["alpha", "lambda", "lambda_gap"]
    cols += [f"lambda_pred_{k}" for k in range(K + 1)]
    cols += [f"lambda_err_{k}" for k in range(K + 1)]
    cols += [f"eigres_{k}" for k in range(K + 1)]
    cols += [f"eigres_l2_{k}" for k in range(K + 1)]
    return cols + ["drift", "upper_bound", "iterations", "residual"]


def rates_from_table(header: list[str], data: np.ndarray) -> dict:
    cols = {h: data[:, i] for i, h in enumerate(header)
            if h.startswith("lambda_err_") or (h.startswith("eigres_") and not h.startswith("eigres_l2"))}
    alphas = data[:, header.index("alpha")] if data.size else np.array([])
    reps = rate_reports(alphas, cols)
    win = default_window(alphas)
    return {"window": list(win) if win else None,
            "rates": {k: (v.as_dict() if v else None) for k, v in reps.items()}}


def _print_rates(rates: dict) -> None:
    for k, v in rates["rates"].items():
        print(f"{k:>14}: " + (f"slope {fmt(v['slope'])} +- {v['stderr']:.2e}" if v else "unavailable"))


def cmd_sweep(cfg: RunConfig, args) -> int:
    alphas = cfg.alphas()
    if not alphas:
        print("error: sweep range empty", file=sys.stderr)
        return EXIT_INVALID
    tab = sweep(cfg.scenario, alphas, cfg.grid, threads=args.threads)
    K = len(tab.rows[0].lam_pred) - 1
    rows = [[r.alpha, r.lam, r.lam_gap, *r.lam_pred, *r.lam_err, *r.eig_res, *r.eig_res_l2,
             r.drift, r.upper_bound, r.iterations, r.residual] for r in tab.rows]
    path = cfg.out_dir / "sweep.csv"
    write_csv(path, sweep_header(K), rows)
    # fit from the serialized table so that `report` reproduces these numbers exactly
    header, data = read_csv(path)
    rates = rates_from_table(header, data)
    max_n = 4095 if cfg.scenario.dim == 1 else 255
    refine = refinement_check(cfg.scenario, alphas[-1], cfg.grid, max_node_count=max_n) \
        if math.isfinite(tab.rows[-1].lam_gap) else None
    payload = {"n_alpha": len(alphas), "coefficients": tab.coeffs.as_dict(), **rates,
               "refinement": refine, "warnings": cfg.warnings}
    if "json" in cfg.formats:
        update_summary(cfg.out_dir, "sweep", payload)
    print(f"{len(alphas)} alphas written to {path}")
    _print_rates(rates)
    if refine and not refine["achieved"]:
        print(f"note: h-refinement did not reach 1% of the smallest term "
              f"(relative change {refine['relative_change']:.3g} at n = {refine['node_count']})")
    return EXIT_OK


def cmd_report(cfg: RunConfig | None, args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else cfg.out_dir
    path = Path(args.sweep) if getattr(args, "sweep", None) else out_dir / "sweep.csv"
    if not path.exists():
        print(f"error: {path} not found (run `sweep` first)", file=sys.stderr)
        return EXIT_INVALID
    header, data = read_csv(path)
    if "alpha" not in header:
        print(f"error: {path} has no alpha column", file=sys.stderr)
        return EXIT_INVALID
    rates = rates_from_table(header, data)
    if "json" in (cfg.formats if cfg else ("json",)):
        update_summary(out_dir, "report", rates)
    _print_rates(rates)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    from .verify import run_criteria, scenario_checks

    print("acceptance criteria:")
    results = run_criteria(threads=args.threads, echo=print)
    alphas = cfg.alphas()
    if len(alphas) >= 1:
        print(f"configured scenario ({cfg.scenario.mode}, p={cfg.scenario.p:g}):")
        extra = scenario_checks(cfg.scenario, cfg.grid, alphas, threads=args.threads)
        for r in extra:
            print(r.line())
        results += extra
    failed = [r.name for r in results if not r.passed]
    if "json" in cfg.formats:
        update_summary(cfg.out_dir, "verify", {
            "passed": not failed,
            "results": [{"name": r.name, "passed": r.passed, "detail": r.detail, "seconds": r.seconds}
                        for r in results]})
    print(f"{len(results) - len(failed)}/{len(results)} passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


COMMANDS = {"limit": cmd_limit, "corrections": cmd_corrections, "sweep": cmd_sweep,
            "verify": cmd_verify, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="advecteig",
                                 description="Principal eigenvalue asymptotics for strong advection.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=(name != "report"), help="INI run configuration")
        sp.add_argument("--out-dir", help="output directory (overrides [output] dir)")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--alpha-min", type=float)
        sp.add_argument("--alpha-max", type=float)
        sp.add_argument("--points-per-decade", type=int)
        if name == "report":
            sp.add_argument("--sweep", help="sweep.csv to read (default: <out-dir>/sweep.csv)")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    overrides = {"sweep": {"alpha_min": args.alpha_min, "alpha_max": args.alpha_max,
                           "points_per_decade": args.points_per_decade},
                 "output": {"dir": args.out_dir}}
    cfg = None
    try:
        if args.config:
            cfg = load_config(args.config, overrides)
        elif args.command == "report" and not args.out_dir and not args.sweep:
            print("error: report needs --config, --out-dir or --sweep", file=sys.stderr)
            return EXIT_INVALID
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if cfg is not None:
        for w in cfg.warnings:
            print(f"warning: {w}", file=sys.stderr)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
    elif args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args)
    except (EigenSolverError, StagnationError, FredholmError, TruncationError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
