"""Command-line front end: ``delayjump simulate|price|table|converge``.

Exit codes: 0 success, 2 configuration error, 3 model validation or
admissibility failure, 4 violated precondition, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import load_config
from .convergence import ConvergenceStudy, coupled_errors, fit_rate
from .engine import require_valid, simulate_ensemble
from .exceptions import (
    AdmissibilityError,
    ConfigError,
    DegenerateMarketError,
    DomainError,
    FitError,
    HistoryError,
    ModelValidationError,
    PositivityError,
    PreconditionError,
    QuadratureError,
    RangeError,
    ThinningError,
)
from .measure_change import HistoryPath, require_admissible
from .pricer import (
    fourier_context,
    mc_call_prices,
    price_black_scholes,
    price_bs_mc_paper_style,
    q_terminals,
)
from .tables import MONTHS, markdown_table, replicate_table

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 2, 3, 4, 5

_EXIT_MAP = (
    (ConfigError, EXIT_CONFIG),
    ((ModelValidationError, AdmissibilityError, DegenerateMarketError), EXIT_VALIDATION),
    ((PreconditionError, HistoryError, RangeError), EXIT_PRECONDITION),
    ((QuadratureError, PositivityError, ThinningError, FitError, DomainError), EXIT_NUMERICAL),
)


def _fmt(x):
    return repr(float(x))


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _provenance(cfg, seed):
    return f"# seed={seed} config_sha256={cfg.sha256}\n"


def _need(cfg, *names):
    for n in names:
        if getattr(cfg, n) is None:
            raise ConfigError(f"{n}: required for this command")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out, seed=None, threads=1):
    """Write ``paths.csv`` in long format (path_id, time, value, is_jump)."""
    _need(cfg, "model", "grid")
    blk = cfg.block("simulate")
    seed = cfg.require_seed(seed, "simulate")
    n_paths = blk.get("n_paths", 1)
    if not isinstance(n_paths, int) or n_paths < 1:
        raise ConfigError("simulate.n_paths: expected a positive integer")
    if not cfg.replication_mode:
        require_valid(cfg.model)
    paths = simulate_ensemble(
        cfg.model, cfg.grid, n_paths, seed, threads=threads,
        jump_mode=blk.get("jump_mode", "per_jump"), validate=False,
    )
    target = os.path.join(out, "paths.csv")
    with open(target, "w", encoding="utf-8", newline="") as fh:
        fh.write(_provenance(cfg, seed))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "time", "value", "is_jump"])
        for i, p in enumerate(paths):
            rows = [(t, v, 0) for t, v in zip(p.times, p.values)]
            rows += [(t, v, 1) for t, v in zip(p.jump_times, p.jump_values)]
            rows.sort(key=lambda r: (r[0], r[2]))
            for t, v, j in rows:
                w.writerow([i, _fmt(t), _fmt(v), j])
    return {"paths": target, "n_paths": n_paths, "seed": seed}


def _history(cfg, seed, dt):
    spec = cfg.block("price").get("history")
    mk = cfg.market
    if isinstance(spec, dict) and "values" in spec:
        return HistoryPath(mk.t, spec.get("dt", dt), np.asarray(spec["values"], dtype=float))
    if mk.t == 0.0:
        return HistoryPath.from_phi(cfg.model, dt)
    # observe path 0 of a real-world ensemble up to t
    hseed = spec.get("seed", seed) if isinstance(spec, dict) else seed
    path = simulate_ensemble(cfg.model, cfg.grid, 1, hseed, validate=False)[0]
    return HistoryPath.from_path(path, mk.t)


def cmd_price(cfg, out, seed=None, threads=1):
    """Write ``price.json``; wall time goes to ``timing.json``."""
    blk = cfg.block("price")
    method = blk.get("method", "mc")
    _need(cfg, "market")
    mk, K = cfg.market, cfg.strike
    tau = mk.T - mk.t
    start = time.perf_counter()
    diag = {}
    if method == "bs":
        S0 = blk.get("S0")
        sigma = blk.get("sigma")
        if S0 is None or sigma is None:
            raise ConfigError("price.S0 and price.sigma: required for method 'bs'")
        price, se, used_seed, n_paths = float(price_black_scholes(S0, K, mk.r, sigma, tau)), 0.0, None, None
    elif method == "bs_paper":
        used_seed = cfg.require_seed(seed, "price")
        n_paths = blk.get("n_paths", 2000)
        try:
            res = price_bs_mc_paper_style(
                blk["S0"], blk["alpha"], blk["sigma"], mk.r, K, mk.T, blk.get("n", 8580), n_paths, used_seed
            )
        except KeyError as exc:
            raise ConfigError(f"price.{exc.args[0]}: required for method 'bs_paper'") from None
        price, se = res.price, res.stderr
    else:
        _need(cfg, "model", "grid")
        require_valid(cfg.model)
        used_seed = cfg.require_seed(seed, "price")
        hist = _history(cfg, used_seed, cfg.grid.dt)
        if method == "fourier":
            ctx = fourier_context(cfg.model, mk, hist, cfg.theta_convention)
            w_conv = blk.get("w_convention", "derived")
            if w_conv not in ("derived", "paper"):
                raise ConfigError("price.w_convention: expected 'derived' or 'paper'")
            price, se, n_paths = float(ctx.price(K, w_convention=w_conv)[0]), 0.0, None
            diag = {"A": ctx.A, "Lambda": ctx.Lambda, "w_convention": w_conv}
            diag.update(getattr(ctx, "last_diagnostics", {}))
        else:
            n_paths = blk.get("n_paths", 10000)
            require_admissible(cfg.model, mk.r, cfg.theta_convention)
            if tau == 0.0:
                price, se = max(hist.current - K, 0.0), 0.0
            else:
                st = q_terminals(cfg.model, mk, cfg.grid, n_paths, used_seed, history=hist, threads=threads,
                                 convention=cfg.theta_convention)
                p, e = mc_call_prices(st, K, mk.r, tau)
                price, se = float(p[0]), float(e[0])
    elapsed = time.perf_counter() - start
    result = {
        "method": method,
        "price": price,
        "stderr": se,
        "seed": used_seed,
        "n_paths": n_paths,
        "strike": K,
        "config_sha256": cfg.sha256,
        "diagnostics": diag,
    }
    _write_json(os.path.join(out, "price.json"), result)
    _write_json(os.path.join(out, "timing.json"), {"command": "price", "wall_time_s": elapsed})
    return result


def cmd_table(cfg, out, seed=None, threads=1):
    """Write one CSV per maturity plus a markdown summary."""
    blk = cfg.block("table")
    seed = cfg.require_seed(seed, "table")
    months = blk.get("months", list(MONTHS))
    n_paths = blk.get("n_paths", 2000)
    units = blk.get("units", "annual")
    if units not in ("annual", "literal"):
        raise ConfigError("table.units: expected 'annual' or 'literal'")
    md = ["Replication mode: real-world simulation discounted at r (not arbitrage-free).\n"]
    for mo in months:
        rows = replicate_table(mo, n_paths, seed, units, threads=threads)
        with open(os.path.join(out, f"table_{mo}m.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(_provenance(cfg, seed))
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
        md.append(markdown_table(rows, mo))
    with open(os.path.join(out, "tables.md"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(md))
    return {"months": months, "units": units}


def cmd_converge(cfg, out, seed=None, threads=1):
    """Write ``converge.csv`` (dt, e_hat, stderr) and ``converge.json``."""
    blk = cfg.block("converge")
    seed = cfg.require_seed(seed, "converge")
    threshold = blk.get("threshold", 0.4)
    if blk.get("synthetic"):
        dts = np.array([2.0**-k for k in blk.get("levels", [4, 5, 6, 7, 8])])
        e_hat = blk.get("constant", 1.0) * dts ** blk.get("order", 0.5)
        stderr = np.zeros_like(dts)
        n_paths = 0
    else:
        _need(cfg, "model")
        levels = blk["levels"]
        T = blk.get("T", cfg.grid.T if cfg.grid else 1.0)
        n_paths = blk.get("n_paths", 2000)
        try:
            study = ConvergenceStudy(cfg.model, T, tuple(levels), blk.get("ref_level", max(levels) + 5),
                                     n_paths, seed, blk.get("p", 2.0))
        except ValueError as exc:
            raise ConfigError(f"converge: {exc}") from None
        est = coupled_errors(study, threads=threads)
        dts, e_hat, stderr = est.dt, est.e_hat, est.stderr
    fit = fit_rate(dts, e_hat)
    with open(os.path.join(out, "converge.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(_provenance(cfg, seed))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dt", "e_hat", "stderr"])
        for row in zip(dts, e_hat, stderr):
            w.writerow([_fmt(x) for x in row])
    summary = {
        "slope": fit.slope,
        "r2": fit.r2,
        "n_paths": n_paths,
        "seed": seed,
        "threshold": threshold,
        "passed": bool(fit.slope >= threshold),
        "config_sha256": cfg.sha256,
    }
    _write_json(os.path.join(out, "converge.json"), summary)
    return summary


COMMANDS = {"simulate": cmd_simulate, "price": cmd_price, "table": cmd_table, "converge": cmd_converge}


def build_parser():
    ap = argparse.ArgumentParser(prog="delayjump", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        cfg = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        result = COMMANDS[args.command](cfg, args.out, seed=args.seed, threads=args.threads)
    except Exception as exc:  # map the error hierarchy onto the exit-code contract
        for kinds, code in _EXIT_MAP:
            if isinstance(exc, kinds):
                print(f"delayjump {args.command}: {exc}", file=sys.stderr)
                return code
        raise
    json.dump(result, sys.stdout, sort_keys=True, default=lambda o: None if o is None else str(o))
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
