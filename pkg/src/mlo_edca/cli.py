"""Command-line front end: analyze, sensitivity, optimize, validate.

Exit codes: 0 success, 1 infeasible result or failed validation,
2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import analyze
from .ccdf import ccdf_curve, delay_violation, threshold_slots
from .config import load_config
from .fixed_point import solve
from .delay_gf import build_contexts
from .mc_oracle import empirical_ccdf, simulate, wilson_interval
from .optimizer import (GaConfig, Problem, compare_modes, default_scenario, epsilon_sweep,
                        evaluate_scenario, ga_optimize, write_best_json, write_history_csv)
from .scenario import ConfigError, LinkScenario, MloScenario, check, split_links

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# sweepable AC fields: config key -> (AcEdcaConfig attribute, scale)
SWEEP_FIELDS = {
    "cw_min": ("cw_min", 1),
    "cw_max": ("cw_max", 1),
    "aifsn": ("aifsn", 1),
    "txop_us": ("txop", 1.0),
    "retry_limit": ("retry_limit", 1),
    "n_stations": ("n_stations", 1),
    "payload_bytes": ("payload", 8.0),
    "dmax_ms": ("delay_bound", 1.0),
    "epsilon": ("violation_threshold", 1.0),
}


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _write_manifest(args, out: Path) -> None:
    manifest = {
        "subcommand": args.command,
        "config": str(args.config),
        "out": str(out),
        "seed": args.seed,
        "overrides": list(args.set),
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _ccdf_grid(x_max: int, points: int = 40) -> np.ndarray:
    return np.unique(np.geomspace(1, max(x_max, 2), points).round().astype(int))


# -- analyze -----------------------------------------------------------------

ANALYSIS_COLUMNS = ("link", "ac", "name", "p", "c", "loss", "violation", "theta", "margin")


def cmd_analyze(mlo: MloScenario, out: Path) -> int:
    result = analyze(mlo)
    rows = []
    for r in result.acs:
        rows.append((r.link, r.ac + 1, mlo.all_acs[r.ac].name, r.p, r.c, r.loss,
                     r.violation, r.theta, r.margin))
    _write_csv(out / "analysis.csv", ANALYSIS_COLUMNS, rows)

    step = mlo.phy.discrete_step
    for link in result.links:
        if not link.ok:
            print(f"link {link.link}: {link.error}", file=sys.stderr)
            continue
        for k, i in enumerate(link.members):
            ac = mlo.all_acs[i]
            bound = ac.delay_bound if math.isfinite(ac.delay_bound) else 100.0
            xs = _ccdf_grid(2 * threshold_slots(bound, step))
            probs = ccdf_curve(link.contexts[k], xs)
            _write_csv(out / f"ccdf_ac{i + 1}.csv", ("x_slots", "x_ms", "probability"),
                       [(int(x), x * step / 1000.0, pr) for x, pr in zip(xs, probs)])

    print(" ".join(f"{c:>10}" for c in ANALYSIS_COLUMNS))
    for row in rows:
        print(" ".join(f"{v:>10}" if isinstance(v, (int, str)) else f"{v:>10.4g}" for v in row))
    return EXIT_OK if result.ok else EXIT_FAIL


# -- sensitivity -------------------------------------------------------------

def parse_range(spec: str) -> List[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    try:
        if ":" in spec:
            lo, hi, step = (float(v) for v in spec.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            vals = [lo + i * step for i in range(n)]
        else:
            vals = [float(v) for v in spec.split(",")]
    except ValueError:
        raise UsageError(f"bad sweep range {spec!r}") from None
    return [int(v) if v == int(v) else v for v in vals]


def _sweep_spec(raw: dict, cli_sweeps: Sequence[str], cli_ac: Optional[int]):
    sweep = dict(raw.get("sweep", {}))
    ac = cli_ac if cli_ac is not None else sweep.get("ac", 1)
    fields = {}
    # sweeps on the command line replace the ones stored in the config
    if not cli_sweeps:
        for key, vals in sweep.get("fields", {}).items():
            fields[key] = parse_range(vals) if isinstance(vals, str) else list(vals)
    for item in cli_sweeps:
        if "=" not in item:
            raise UsageError(f"sweep must look like field=a:b:step, got {item!r}")
        key, spec = item.split("=", 1)
        fields[key] = parse_range(spec)
    if not fields:
        raise UsageError("no sweep fields given")
    for key in fields:
        if key not in SWEEP_FIELDS:
            raise UsageError(f"unknown sweep field {key!r}; choose from {sorted(SWEEP_FIELDS)}")
    return int(ac), fields


def cmd_sensitivity(mlo: MloScenario, raw: dict, out: Path, sweeps, ac_number) -> int:
    ac_idx, fields = _sweep_spec(raw, sweeps, ac_number)
    if not 1 <= ac_idx <= len(mlo.all_acs):
        raise UsageError(f"swept AC {ac_idx} does not exist")
    names = list(fields)
    grids = np.meshgrid(*[fields[n] for n in names], indexing="ij")
    points = list(zip(*[g.ravel().tolist() for g in grids]))
    I = len(mlo.all_acs)
    header = names + [f"theta_{i + 1}" for i in range(I)] + [f"loss_{i + 1}" for i in range(I)] + ["status"]
    rows = []
    for values in points:
        changes = {SWEEP_FIELDS[n][0]: v * SWEEP_FIELDS[n][1] for n, v in zip(names, values)}
        acs = list(mlo.all_acs)
        acs[ac_idx - 1] = replace(acs[ac_idx - 1], **changes)
        point = replace(mlo, all_acs=tuple(acs))
        try:
            check(point, txop_grid=raw.get("txop_grid", True))
            res = analyze(point)
        except ConfigError as exc:
            rows.append(list(values) + [math.nan] * (2 * I) + [f"invalid: {exc}"])
            continue
        theta = [math.nan] * I
        loss = [math.nan] * I
        for r in res.acs:
            theta[r.ac], loss[r.ac] = r.theta, r.loss
        status = "ok" if res.ok else "; ".join(l.error for l in res.links if l.error)
        rows.append(list(values) + theta + loss + [status])
    _write_csv(out / "sensitivity.csv", header, rows)
    print(f"{len(rows)} grid points written to {out / 'sensitivity.csv'}")
    return EXIT_OK


# -- optimize ----------------------------------------------------------------

def _ga_config(raw: dict, seed: int) -> GaConfig:
    kw = dict(raw.get("ga", {}))
    kw["seed"] = seed
    try:
        return GaConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad ga section: {exc}") from None


COMPARISON_COLUMNS = ("config", "ac", "name", "link", "loss", "violation", "epsilon", "feasible")


def _comparison_rows(label, mlo, rec):
    for i, ac in enumerate(mlo.all_acs):
        yield (label, i + 1, ac.name, mlo.assignment[i], rec.losses[i], rec.violations[i],
               ac.violation_threshold, "yes" if rec.margins[i] < 0 else "no")


def cmd_optimize(mlo: MloScenario, raw: dict, out: Path, seed: int, modes: Sequence[str]) -> int:
    ga = _ga_config(raw, seed)
    problem = Problem(mlo.phy, mlo.all_acs, mlo.num_links)
    unknown = set(modes) - {"single", "mlo"}
    if unknown or not modes:
        raise UsageError(f"--modes takes single and/or mlo, got {','.join(modes)}")

    default_mlo = default_scenario(problem)
    rows = list(_comparison_rows("default", default_mlo, evaluate_scenario(default_mlo)))
    results = {}
    if set(modes) == {"single", "mlo"}:
        cmp = compare_modes(problem, ga)
        results = {"single": cmp.single, "mlo": cmp.multi}
    elif "single" in modes:
        results["single"] = ga_optimize(problem.single_link(), ga, multi_link=False)
    else:
        results["mlo"] = ga_optimize(problem, ga, multi_link=True)

    ok = True
    for mode, res in results.items():
        target = problem if mode == "mlo" else problem.single_link()
        write_history_csv(res.history, out / f"history_{mode}.csv")
        write_best_json(res, target, out / f"best_{mode}.json")
        rows += _comparison_rows(f"optimized_{mode}", res.best.decode(target), res.record)
        status = "feasible" if res.feasible else "INFEASIBLE (best infeasible candidate reported)"
        print(f"{mode}: fitness {res.record.fitness:.4f}, {status}")
        ok &= res.feasible
    _write_csv(out / "comparison.csv", COMPARISON_COLUMNS, rows)
    return EXIT_OK if ok else EXIT_FAIL


EPS_SWEEP_COLUMNS = ("point", "ac", "epsilon", "mode", "fitness", "feasible", "evaluations",
                     "generations")


def parse_epsilon_sweep(spec: str, num_acs: int):
    """``AC=v1,v2,...`` with a 1-based AC number."""
    ac, sep, values = spec.partition("=")
    try:
        ac_idx = int(ac)
        eps = [float(v) for v in values.split(",")]
    except ValueError:
        raise UsageError(f"bad epsilon sweep {spec!r}; expected AC=v1,v2,...") from None
    if not sep or not 1 <= ac_idx <= num_acs:
        raise UsageError(f"bad epsilon sweep {spec!r}; AC must be in 1..{num_acs}")
    if not all(0.0 < e <= 1.0 for e in eps):
        raise UsageError("sweep thresholds must lie in (0, 1]")
    return ac_idx, eps


def cmd_epsilon_sweep(mlo: MloScenario, raw: dict, out: Path, seed: int, spec: str) -> int:
    ac_idx, values = parse_epsilon_sweep(spec, len(mlo.all_acs))
    problem = Problem(mlo.phy, mlo.all_acs, mlo.num_links)
    rows, ok = [], True
    for j, (eps, cmp) in enumerate(epsilon_sweep(problem, _ga_config(raw, seed), ac_idx - 1, values), 1):
        for mode, res in (("single", cmp.single), ("mlo", cmp.multi)):
            write_history_csv(res.history, out / f"history_{mode}_eps{j}.csv")
            rows.append((j, ac_idx, eps, mode, res.record.fitness, "yes" if res.feasible else "no",
                         res.evaluations, len(res.history)))
            ok &= res.feasible
        print(f"eps_{ac_idx} = {eps:g}: single {cmp.single.record.fitness:.4f}, "
              f"mlo {cmp.multi.record.fitness:.4f}")
    _write_csv(out / "eps_sweep.csv", EPS_SWEEP_COLUMNS, rows)
    return EXIT_OK if ok else EXIT_FAIL


# -- validate ----------------------------------------------------------------

VALIDATION_COLUMNS = ("seed", "ac", "metric", "analytic", "estimate", "lower", "upper", "pass")
ANCHORS_MS = (10.0, 50.0, 100.0)


def validation_rows(link: LinkScenario, packets: int, seed: int):
    """Analytic vs Monte Carlo comparison rows for one seed."""
    sol = solve(link)
    ctxs = build_contexts(link, sol)
    rep = simulate(link, packets=packets, seed=seed)
    sig = rep.p_sigma()
    step = link.phy.discrete_step
    rows = []
    for k, st in enumerate(rep.stats):
        p_hat, s = rep.p_hat[k], sig[k]
        rows.append((seed, k + 1, "p", sol.p[k], p_hat, p_hat - 3 * s, p_hat + 3 * s))
        c_hat = rep.c_hat[k]
        sc = math.sqrt(c_hat * (1 - c_hat) / st.attempts) if st.attempts else math.inf
        rows.append((seed, k + 1, "c", sol.c[k], c_hat, c_hat - 3 * sc, c_hat + 3 * sc))
        lo, hi = wilson_interval(st.drops, st.drops + st.successes, 3.0)
        rows.append((seed, k + 1, "loss", sol.loss[k], rep.loss_hat[k], lo, hi))
        for ms in ANCHORS_MS:
            x = threshold_slots(ms, step)
            tail = empirical_ccdf(rep.delays(k), x * step)
            rows.append((seed, k + 1, f"ccdf_{ms:g}ms", delay_violation(ctxs[k], ms, step).probability,
                         tail.probability, tail.lower, tail.upper))
    return [r + ("yes" if r[5] <= r[3] <= r[6] else "no",) for r in rows]


def cmd_validate(mlo: MloScenario, out: Path, packets: int, seeds: Sequence[int]) -> int:
    links = [l for l in split_links(mlo) if l.num_acs]
    if len(links) != 1:
        raise UsageError("validate needs a single-link configuration")
    rows = []
    for seed in seeds:
        rows += validation_rows(links[0], packets, seed)
    _write_csv(out / "validation.csv", VALIDATION_COLUMNS, rows)
    failed = [r for r in rows if r[-1] == "no"]
    for r in rows:
        print(f"seed {r[0]} AC{r[1]} {r[2]:<12} analytic {r[3]:.5g}  "
              f"estimate {r[4]:.5g} [{r[5]:.5g}, {r[6]:.5g}]  {'PASS' if r[-1] == 'yes' else 'FAIL'}")
    return EXIT_FAIL if failed else EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. acs.2.aifsn=12 (repeatable)")

    ap = argparse.ArgumentParser(prog="mlo-edca", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="per-AC metrics and CCDF curves")
    s = sub.add_parser("sensitivity", parents=[common], help="parameter sweep grid")
    s.add_argument("--ac", type=int, default=None, help="1-based AC to sweep")
    s.add_argument("--sweep", action="append", default=[], metavar="FIELD=A:B:STEP")
    o = sub.add_parser("optimize", parents=[common], help="genetic parameter search")
    o.add_argument("--modes", default="single", help="comma list of single, mlo")
    o.add_argument("--epsilon-sweep", default=None, metavar="AC=V1,V2,...",
                   help="compare both modes for each violation threshold of one AC")
    v = sub.add_parser("validate", parents=[common], help="compare against Monte Carlo")
    v.add_argument("--packets", type=int, default=None, help="packets per AC")
    v.add_argument("--seeds", type=int, default=None, help="number of seeds")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        mlo, raw = load_config(args.config, args.set)
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(args, out)
        if args.command == "analyze":
            return cmd_analyze(mlo, out)
        if args.command == "sensitivity":
            return cmd_sensitivity(mlo, raw, out, args.sweep, args.ac)
        if args.command == "optimize" and args.epsilon_sweep:
            return cmd_epsilon_sweep(mlo, raw, out, args.seed, args.epsilon_sweep)
        if args.command == "optimize":
            return cmd_optimize(mlo, raw, out, args.seed, args.modes.split(","))
        val = raw.get("validate", {})
        packets = args.packets or int(val.get("packets", 100_000))
        nseeds = args.seeds or int(val.get("seeds", 1))
        return cmd_validate(mlo, out, packets, [args.seed + i for i in range(nseeds)])
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
