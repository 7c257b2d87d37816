"""Acceptance criteria 1-9.

Each test prints one ``CRITERION n PASS|FAIL`` line; the lines are repeated
in the pytest terminal summary.  Criterion 8 is soft: its line is printed
but a miss does not fail the run.  Run directly with
``python3 tests/test_acceptance.py`` to get only the summary lines.
"""

import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import acceptance_model, pricing_model  # noqa: E402

from delayjump.cli import main  # noqa: E402
from delayjump.coefficients import constant  # noqa: E402
from delayjump.convergence import ConvergenceStudy, coupled_errors, fit_rate, holding_study  # noqa: E402
from delayjump.engine import DelayedJumpModel, SimGrid, simulate_ensemble  # noqa: E402
from delayjump.measure_change import (  # noqa: E402
    HistoryPath,
    MarketSpec,
    radon_nikodym_ensemble,
    simulate_q_ensemble,
    theta,
)
from delayjump.pricer import (  # noqa: E402
    char_exponent,
    fourier_context,
    mc_call_prices,
    price_black_scholes,
    price_fourier,
    price_mc,
    q_terminals,
)
from delayjump.tables import PAPER_TABLES, replicate_table  # noqa: E402

RESULTS = []
R = 0.01


def report(n, ok, detail, soft=False):
    tag = "PASS" if ok else ("SOFT-FAIL" if soft else "FAIL")
    line = f"CRITERION {n} {tag}: {detail}"
    RESULTS.append(line)
    print(line)
    if not soft:
        assert ok, line


def test_criterion_1_positivity():
    start = time.perf_counter()
    paths = simulate_ensemble(acceptance_model(), SimGrid(1.0, 256), 10_000, 101)
    low = min(min(p.values.min(), p.jump_values.min(initial=np.inf), p.jump_values_left.min(initial=np.inf))
              for p in paths)
    elapsed = time.perf_counter() - start
    report(1, low > 0 and elapsed < 30, f"min stored value {low:.4g} over 10^4 paths, {elapsed:.1f}s (< 30s)")


def test_criterion_2_strong_order():
    start = time.perf_counter()
    est = coupled_errors(ConvergenceStudy(acceptance_model(), 1.0, (4, 5, 6, 7, 8), 13, 2000, 1, 2.0))
    fit = fit_rate(est)
    elapsed = time.perf_counter() - start
    ok = fit.slope >= 0.4 and fit.r2 >= 0.9 and elapsed < 600
    report(2, ok, f"slope {fit.slope:.3f} (>= 0.4), R^2 {fit.r2:.3f} (>= 0.9), {elapsed:.1f}s (< 600s)")


def test_criterion_3_holding_error():
    dts, e, _ = holding_study(acceptance_model(), 1.0, (4, 5, 6, 7, 8), 2000, 2, p=2.0)
    fit = fit_rate(dts, e)
    report(3, fit.slope >= 0.8, f"mid-interval deviation slope {fit.slope:.3f} (>= 0.8) over 5 levels")


def test_criterion_4_girsanov_normalisation():
    m = pricing_model()
    th = theta(m, R, 100.0)
    paths = simulate_ensemble(m, SimGrid(1.0, 64), 100_000, 404)
    d = radon_nikodym_ensemble(m, R, paths)
    mean, se = d.mean(), d.std(ddof=1) / math.sqrt(d.size)
    report(4, abs(mean - 1) < 3 * se and abs(th - 0.5) < 1e-12,
           f"theta {th:.3f}, E_P[density] {mean:.5f} +- {se:.5f} (|.-1| < 3 se)")


def test_criterion_5_q_martingale():
    m = pricing_model()
    st = simulate_q_ensemble(m, MarketSpec(R, 100.0, 1.0), SimGrid(1.0, 64), 100_000, 505, record=False)
    disc = math.exp(-R) * st
    mean, se = disc.mean(), disc.std(ddof=1) / math.sqrt(disc.size)
    report(5, abs(mean - 100.0) < 3 * se, f"E_Q[e^-rT S(T)] {mean:.4f} +- {se:.4f} vs phi(0) = 100")


def test_criterion_6_fourier_vs_mc():
    m = pricing_model()
    grid = SimGrid(1.0, 64)
    start = time.perf_counter()
    worst, ok, lines = 0.0, True, []
    for i, t in enumerate((0.75, 0.875, 1 - 1 / 64)):
        # one observed history per t, shared by both pricers
        h = HistoryPath(t, grid.dt, np.full(17, 100.0))
        strikes = (90.0, 100.0, 110.0)
        # one 10^6-path terminal sample per t, shared by the strikes
        st = q_terminals(m, MarketSpec(R, 100.0, 1.0, t), grid, 1_000_000, 600 + i, history=h)
        mc, se = mc_call_prices(st, strikes, R, 1.0 - t)
        for K, v, e in zip(strikes, mc, se):
            f = price_fourier(m, MarketSpec(R, K, 1.0, t), h).price
            tol = max(0.005 * f, 3 * e)
            gap = abs(f - v)
            ok &= gap <= tol
            worst = max(worst, gap / tol)
            lines.append(f"t={t:.4f} K={K:g}: fourier {f:.5f} mc {v:.5f} +- {e:.5f}")
    elapsed = time.perf_counter() - start
    print("\n".join(lines))
    report(6, ok and elapsed < 900, f"9 (t, K) points, worst gap/tolerance {worst:.2f} (<= 1), {elapsed:.0f}s (< 900s)")


def test_criterion_7_degenerate_reductions():
    pm = pricing_model()
    flat = DelayedJumpModel(constant(0.03), constant(0.0), pm.phi, pm.delay, pm.levy)
    grid = SimGrid(1.0, 64)
    errs = []
    for K in (80.0, 100.0, 120.0):
        want0 = max(100 - K * math.exp(-R), 0.0)
        errs.append(abs(price_mc(flat, MarketSpec(R, K, 1.0), grid, 1000, 1).price - want0))
        errs.append(abs(float(price_black_scholes(100.0, K, R, 0.0, 1.0)) - want0))
        want = max(100 - K * math.exp(-R * 0.125), 0.0)
        h = HistoryPath(0.875, grid.dt, np.full(17, 100.0))
        errs.append(abs(price_fourier(flat, MarketSpec(R, K, 1.0, 0.875), h).price - want))
    det = max(errs)
    # K = 0 is not a MarketSpec strike: the payoff is S(T) itself
    st = simulate_q_ensemble(pm, MarketSpec(R, 1.0, 1.0), grid, 100_000, 707, record=False)
    pay = math.exp(-R) * st
    k0_mean, k0_se = pay.mean(), pay.std(ddof=1) / math.sqrt(pay.size)
    ctx = fourier_context(pm, MarketSpec(R, 100.0, 1.0, 0.875), HistoryPath(0.875, grid.dt, np.full(17, 100.0)))
    mart = abs(char_exponent(ctx, 1).real + math.log(ctx.A))
    ok = det <= 1e-10 and abs(k0_mean - 100) < 3 * k0_se and mart <= 1e-10
    report(7, ok, f"g=0 max error {det:.1e} (<= 1e-10), K=0 MC {k0_mean:.3f} +- {k0_se:.3f} vs 100, "
                  f"|char(1) + ln A| {mart:.1e} (<= 1e-10)")


def test_criterion_8_soft_replication():
    rows = replicate_table(1, n_paths=2000, seed=0, units="annual")
    jump_gap = max(abs(r["jump"] - r["paper_jump"]) for r in rows)
    bs_gap = min(max(abs(r[c] - r["paper_bs"]) for r in rows) for c in ("bs_alpha", "bs_r"))
    print(" ".join(f"K={r['strike']:g}:{r['jump']:.2f}/{r['paper_jump']}" for r in rows))
    report(8, jump_gap <= 1.0 and bs_gap <= 1.0,
           f"T=1 month jump column max gap {jump_gap:.2f}, best BS column max gap {bs_gap:.2f} (<= 1.0)", soft=True)
    assert set(PAPER_TABLES) == {1, 3, 6}


def test_criterion_9_reproducibility(tmp_path):
    cfg_dir = Path(__file__).resolve().parents[1] / "configs"
    runs = {
        "simulate": json.loads((cfg_dir / "simulate.json").read_text()),
        "price": json.loads((cfg_dir / "price_mc.json").read_text()),
        "converge": json.loads((cfg_dir / "converge.json").read_text()),
        "table": json.loads((cfg_dir / "table.json").read_text()),
    }
    runs["price"]["price"]["n_paths"] = 20_000
    runs["converge"]["converge"].update(n_paths=300)
    runs["table"]["table"].update(months=[1], n_paths=100)
    same = []
    for cmd, cfg in runs.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for threads in (1, 8):
            out = tmp_path / f"{cmd}_{threads}"
            assert main([cmd, "--config", str(path), "--out", str(out), "--threads", str(threads)]) == 0
            # wall time is the one intentionally non-reproducible output
            outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir()) if f.name != "timing.json"})
        same.append(outs[0] == outs[1])
    report(9, all(same), f"byte-identical outputs for threads 1 and 8: {dict(zip(runs, same))}")


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
