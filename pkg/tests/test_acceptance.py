"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The oracle and optimisation criteria drive the command-line tool, so the
same runs also feed the determinism check at the end.  Criteria 6 to 8 take
most of the time (about 1.5 hours on one core); deselect them with
``-m "not slow"`` for a quick pass.
"""
import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest

from mlo_edca.ccdf import invert_ccdf
from mlo_edca.cli import main
from mlo_edca.delay_gf import build_contexts, poly_at, poly_on_circle
from mlo_edca.fixed_point import solve
from mlo_edca.optimizer import GeneBounds
from mlo_edca.scenario import DSSS_PHY, LinkScenario, validate

from conftest import make_ac

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
BASELINE = CONFIGS / "two_ac_baseline.json"
FIVE_AC = CONFIGS / "five_ac_mlo.json"
EPS_SWEEP = "1=1e-7,1e-6,1e-5,1e-4"
SEED = 0


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class Runs:
    """CLI invocations, each executed at most once per round."""

    def __init__(self, root: Path):
        self.root = root
        self.done = {}

    def get(self, name, argv, round_=1):
        key = (name, round_)
        if key not in self.done:
            out = self.root / f"round{round_}" / name
            start = time.perf_counter()
            code = main(argv + ["--out", str(out), "--seed", str(SEED)])
            self.done[key] = (out, code, time.perf_counter() - start)
        return self.done[key]

    def validation(self, round_=1):
        return self.get("validate", ["validate", "--config", str(BASELINE),
                                     "--packets", "100000", "--seeds", "1"], round_)

    def sensitivity(self, round_=1):
        return self.get("sensitivity", ["sensitivity", "--config", str(BASELINE)], round_)

    def optimization(self, round_=1):
        return self.get("optimize", ["optimize", "--config", str(FIVE_AC),
                                     "--modes", "single,mlo"], round_)

    def eps_sweep(self, round_=1):
        return self.get("eps_sweep", ["optimize", "--config", str(FIVE_AC),
                                      "--epsilon-sweep", EPS_SWEEP], round_)


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return Runs(tmp_path_factory.mktemp("acceptance"))


# -- 1: normalisation ---------------------------------------------------------

def random_link(rng, bounds=GeneBounds()):
    acs = []
    for _ in range(int(rng.integers(1, 4))):
        e_min = int(rng.integers(bounds.cw_min_exp[0], bounds.cw_min_exp[1] + 1))
        lo, hi = bounds.ratio_range(e_min)
        e_ratio = int(rng.integers(lo, hi + 1))
        acs.append(make_ac(
            aifsn=int(rng.integers(bounds.aifsn[0], bounds.aifsn[1] + 1)),
            cw_min=2 ** e_min, cw_max=2 ** (e_min + e_ratio),
            txop=32 * int(rng.integers(bounds.txop_steps[0], bounds.txop_steps[1] + 1)),
            retry=int(rng.integers(bounds.retry[0], bounds.retry[1] + 1)),
            n=int(rng.integers(1, 7)),
            payload_bytes=int(rng.integers(50, 2001))))
    return LinkScenario(DSSS_PHY, tuple(acs))


def test_criterion_1_gf_normalisation(capsys):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    gf_err = pi_err = 0.0
    for _ in range(50):
        link = random_link(rng)
        assert validate(link) == []
        sol = solve(link)
        pi_err = max(pi_err, abs(sol.stationary.pi.sum() - 1.0))
        for ctx in build_contexts(link, sol):
            gf_err = max(gf_err, abs(ctx(1.0)[0] - 1.0))
    elapsed = time.perf_counter() - start
    ok = gf_err < 1e-9 and pi_err < 1e-12 and elapsed < 60
    report(capsys, 1, ok, f"max |D(1)-1| = {gf_err:.2e}, max |sum pi - 1| = {pi_err:.2e}, "
                          f"{elapsed:.1f} s")
    assert ok


# -- 2: inversion exactness ---------------------------------------------------

class Polynomial:
    def __init__(self, weights):
        self.terms = tuple(sorted(weights.items()))

    def __call__(self, z):
        return poly_at(self.terms, z)

    def on_circle(self, r, size):
        return poly_on_circle(self.terms, r, size)


def geometric(q):
    return lambda z: q * np.asarray(z) / (1 - (1 - q) * np.asarray(z))


TAILS = {
    "point mass at 5000": (Polynomial({5000: 1.0}), lambda x: (x <= 5000) * 1.0),
    "mixture 0.3@2000 + 0.7@7000": (Polynomial({2000: 0.3, 7000: 0.7}),
                                    lambda x: 0.3 * (x <= 2000) + 0.7 * (x <= 7000)),
    "geometric q=0.3": (geometric(0.3), lambda x: 0.7 ** (x - 1.0)),
    "geometric q=1e-3": (geometric(1e-3), lambda x: (1 - 1e-3) ** (x - 1.0)),
}


def test_criterion_2_inversion_exactness(capsys):
    xs = np.arange(1, 10_001)
    start = time.perf_counter()
    worst = {}
    for name, (gf, tail) in TAILS.items():
        got = np.array([invert_ccdf(gf, int(x)).probability for x in xs])
        worst[name] = float(np.max(np.abs(got - tail(xs))))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) < 1e-8 and elapsed < 60
    detail = ", ".join(f"{k}: {v:.1e}" for k, v in worst.items())
    report(capsys, 2, ok, f"max errors {detail}; {elapsed:.1f} s")
    assert ok


# -- 3 and 4: Monte Carlo oracle ----------------------------------------------

def test_criterion_3_fixed_point_oracle(runs, capsys):
    out, _, elapsed = runs.validation()
    rows = [r for r in read_rows(out / "validation.csv") if r["metric"] in ("p", "c", "loss")]
    misses = [f"AC{r['ac']} {r['metric']}" for r in rows if r["pass"] != "yes"]
    ok = len(rows) == 6 and not misses and elapsed < 300
    summary = "; ".join(f"AC{r['ac']} {r['metric']} {float(r['analytic']):.4g} vs "
                        f"{float(r['estimate']):.4g}" for r in rows)
    report(capsys, 3, ok, f"{summary}; outside 3 sigma: {misses or 'none'}; {elapsed:.0f} s")
    assert ok


def test_criterion_4_delay_tail_oracle(runs, capsys):
    out, _, elapsed = runs.validation()
    rows = [r for r in read_rows(out / "validation.csv") if r["metric"].startswith("ccdf_")]
    per_ac = {}
    for r in rows:
        per_ac.setdefault(r["ac"], []).append(r)
    ok = elapsed < 300 and len(rows) == 6
    parts = []
    for ac, rs in sorted(per_ac.items()):
        inside = sum(r["pass"] == "yes" for r in rs)
        ok &= inside >= 2
        anchors = ", ".join(f"{r['metric'][5:]} {float(r['analytic']):.4g} in "
                            f"[{float(r['lower']):.4g}, {float(r['upper']):.4g}]"
                            f"{'' if r['pass'] == 'yes' else ' NO'}" for r in rs)
        parts.append(f"AC{ac} {inside}/3 ({anchors})")
    report(capsys, 4, ok, "; ".join(parts))
    assert ok


# -- 5: sensitivity trends ----------------------------------------------------

def test_criterion_5_sensitivity_trends(runs, capsys):
    out, code, elapsed = runs.sensitivity()
    rows = read_rows(out / "sensitivity.csv")
    grid = {(int(r["aifsn"]), float(r["txop_us"])): r for r in rows}
    aifsns = sorted({a for a, _ in grid})
    txops = sorted({t for _, t in grid})
    assert code == 0 and len(aifsns) == 14 and len(txops) == 16
    assert all(r["status"] == "ok" for r in rows)

    def col(a, key):
        return [float(grid[a, t][key]) for t in txops]

    trend_a = all(all(y >= x for x, y in zip(col(a, "theta_2"), col(a, "theta_2")[1:]))
                  for a in aifsns if a >= 12)
    trend_b = all(float(grid[a, 8160.0]["theta_1"]) < float(grid[a, 0.0]["theta_1"])
                  for a in aifsns if a <= 3)
    # AIFSN_2 decreasing from 15 towards AIFSN_1 = 8
    towards = [a for a in reversed(aifsns) if a >= 8]
    loss2 = [float(grid[a, 0.0]["loss_2"]) for a in towards]
    trend_c = all(all(float(grid[b, t]["loss_2"]) > float(grid[a, t]["loss_2"])
                      for a, b in zip(towards, towards[1:])) for t in txops)
    ok = trend_a and trend_b and trend_c and elapsed < 600
    report(capsys, 5, ok,
           f"(a) theta_2 non-decreasing in TXOP_2 for AIFSN_2 >= 12: {trend_a}; "
           f"(b) theta_1 lower at TXOP_2 = 8160 for AIFSN_2 <= 3: {trend_b}; "
           f"(c) P_loss,2 rising as AIFSN_2 goes 15 -> 8: {trend_c} "
           f"({', '.join(f'{v:.3g}' for v in loss2)}); {elapsed:.0f} s")
    assert ok


# -- 6 and 7: optimisation ----------------------------------------------------

def history_monotone(path):
    best = [float(r["best_fitness"]) for r in read_rows(path)]
    return all(y >= x for x, y in zip(best, best[1:]))


@pytest.mark.slow
def test_criterion_6_optimisation_dominance(runs, capsys):
    out, _, elapsed = runs.optimization()
    best = {m: json.loads((out / f"best_{m}.json").read_text())["evaluation"]
            for m in ("single", "mlo")}
    fitness = {m: float(best[m]["fitness"]) for m in best}
    default_ok = all(r["feasible"] == "yes" for r in read_rows(out / "comparison.csv")
                     if r["config"] == "default")
    feasible = best["single"]["feasible"]
    dominance = fitness["mlo"] >= fitness["single"]
    monotone = all(history_monotone(out / f"history_{m}.csv") for m in best)
    ok = feasible and dominance and monotone and elapsed < 1800
    report(capsys, 6, ok,
           f"(a) single-link feasible: {feasible} (defaults feasible: {default_ok}); "
           f"(b) fitness MLO {fitness['mlo']:.4f} >= single {fitness['single']:.4f}: {dominance}; "
           f"(c) best-so-far monotone: {monotone}; {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_7_epsilon_sweep(runs, capsys):
    out, _, elapsed = runs.eps_sweep()
    rows = read_rows(out / "eps_sweep.csv")
    points = {}
    for r in rows:
        points.setdefault(float(r["epsilon"]), {})[r["mode"]] = float(r["fitness"])
    holds = {e: f["mlo"] >= f["single"] for e, f in points.items()}
    ok = len(points) == 4 and all(holds.values()) and elapsed < 3600
    detail = "; ".join(f"eps_1={e:g}: MLO {f['mlo']:.4f} vs single {f['single']:.4f}"
                       for e, f in points.items())
    report(capsys, 7, ok, f"{detail}; {elapsed:.0f} s")
    assert ok


# -- 8: determinism -----------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_determinism(runs, capsys):
    differing, compared = [], 0
    for name in ("validation", "sensitivity", "optimization", "eps_sweep"):
        first, _, _ = getattr(runs, name)(1)
        second, _, _ = getattr(runs, name)(2)
        for path in sorted(first.glob("*.csv")):
            compared += 1
            twin = second / path.name
            if not twin.exists() or twin.read_bytes() != path.read_bytes():
                differing.append(f"{first.name}/{path.name}")
    ok = compared > 0 and not differing
    report(capsys, 8, ok, f"{compared} CSV files compared, differing: {differing or 'none'}")
    assert ok
