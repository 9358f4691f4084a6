import csv
import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from mlo_edca.optimizer import (Chromosome, EvalRecord, GaConfig, GeneBounds, Problem,
                                Evaluator, compare_modes, default_category, default_scenario, encode, epsilon_sweep,
                                evaluate, evaluate_scenario, fitness_of, ga_optimize, rank_key,
                                write_best_json, write_history_csv)
from mlo_edca.scenario import DSSS_PHY, validate

from conftest import make_ac

SMALL = GaConfig(population=12, generations=6, elite=2, stagnation=4, seed=3)


def small_problem(links=2):
    acs = (make_ac(n=2, payload_bytes=200, dmax=50, eps=1e-2),
           make_ac(n=3, payload_bytes=1000, dmax=200, eps=1e-1))
    return Problem(DSSS_PHY, acs, links)


def record(fitness, margins, converged=True):
    return EvalRecord(fitness, tuple(margins), (0.0,) * len(margins), (0.1,) * len(margins),
                      converged and all(m < 0 for m in margins), converged)


def test_fitness_is_log_sum():
    assert fitness_of([0.1, 0.1]) == pytest.approx(2.0)
    assert fitness_of([0.0]) == pytest.approx(16.0)
    assert fitness_of([0.1, 0.01], weights=[2.0, 1.0]) == pytest.approx(4.0)


def test_ranking_rules():
    feasible_low = record(1.0, [-0.1])
    feasible_high = record(3.0, [-0.1])
    infeasible_close = record(9.0, [0.01])
    infeasible_far = record(9.0, [0.5])
    failed = record(-math.inf, [math.inf], converged=False)
    ordered = sorted([failed, infeasible_far, feasible_low, infeasible_close, feasible_high],
                     key=rank_key, reverse=True)
    assert ordered == [feasible_high, feasible_low, infeasible_close, infeasible_far, failed]


def test_zero_margin_is_infeasible():
    assert not record(5.0, [0.0, -1.0]).feasible


def test_decoded_configuration():
    problem = small_problem()
    chrom = Chromosome((5, 5, 8, 127, 7, 1, 0, 2, 0, 4, 1, 2), 2)
    mlo = chrom.decode(problem)
    ac1, ac2 = mlo.all_acs
    assert (ac1.cw_min, ac1.cw_max, ac1.aifsn, ac1.txop, ac1.retry_limit) == (32, 1024, 8, 4064.0, 7)
    assert (ac2.cw_min, ac2.cw_max, ac2.txop) == (2, 2, 0.0)
    assert mlo.assignment == (1, 2)
    assert encode(mlo, multi_link=True) == chrom


@given(st.lists(st.tuples(st.integers(1, 10), st.integers(0, 9), st.integers(2, 15),
                          st.integers(0, 256), st.integers(4, 7), st.integers(1, 2)),
                min_size=2, max_size=2))
def test_every_chromosome_decodes_validly(genes):
    flat = []
    for e_min, e_ratio, aifsn, steps, retry, _ in genes:
        flat += [e_min, min(e_ratio, 10 - e_min), aifsn, steps, retry]
    flat += [g[-1] for g in genes]
    mlo = Chromosome(tuple(flat), 2).decode(small_problem())
    assert validate(mlo) == []
    assert encode(mlo, True).genes == tuple(flat)


def test_failed_solve_maps_to_infeasible(monkeypatch):
    import mlo_edca.optimizer as opt
    monkeypatch.setattr(opt, "solve_link", lambda link: (None, None, "did not converge"))
    rec = evaluate(Chromosome((5, 5, 8, 0, 7) * 2, 2), small_problem(1))
    assert rec.fitness == -math.inf and not rec.feasible and not rec.converged
    assert rec.diagnostics == ("did not converge",)


def test_collapsed_space_returns_its_point():
    b = GeneBounds(cw_min_exp=(4, 4), cw_ratio_exp=(2, 2), aifsn=(3, 3), txop_steps=(0, 0), retry=(5, 5))
    problem = Problem(DSSS_PHY, small_problem().acs, 1, bounds=b)
    res = ga_optimize(problem, SMALL)
    assert len(res.history) == 1
    assert res.best.genes == (4, 2, 3, 0, 5) * 2


def test_contention_free_toy_problem():
    problem = Problem(DSSS_PHY, (make_ac(n=1, dmax=100, eps=1e-3),), 1)
    res = ga_optimize(problem, SMALL)
    assert res.feasible
    assert res.record.losses == (0.0,) and res.record.fitness == pytest.approx(16.0)


def test_best_so_far_never_drops():
    res = ga_optimize(small_problem(), SMALL)
    best = [h.best for h in res.history]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))


def test_reevaluation_is_stable():
    problem = small_problem()
    res = ga_optimize(problem, SMALL)
    assert evaluate(res.best, problem) == res.record


def test_seeded_runs_repeat(tmp_path):
    problem = small_problem()
    paths = []
    for run in range(2):
        res = ga_optimize(problem, SMALL)
        paths.append(tmp_path / f"h{run}.csv")
        write_history_csv(res.history, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    rows = list(csv.reader(paths[0].open()))
    assert rows[0] == ["generation", "best_fitness", "mean_fitness", "feasible_fraction"]


def test_best_config_json(tmp_path):
    problem = small_problem()
    res = ga_optimize(problem, SMALL)
    write_best_json(res, problem, tmp_path / "best.json")
    data = json.loads((tmp_path / "best.json").read_text())
    assert len(data["acs"]) == 2 and data["evaluation"]["feasible"] == res.feasible


def test_single_link_mode_is_a_subspace():
    cmp = compare_modes(small_problem(2), SMALL)
    assert cmp.multi.record.fitness >= cmp.single.record.fitness - 1e-9
    assert cmp.multi_dominates


def test_one_link_modes_coincide():
    cmp = compare_modes(small_problem(1), SMALL)
    assert cmp.single.best == cmp.multi.best
    assert cmp.single.history == cmp.multi.history


def test_default_parameters():
    assert [default_category(i, 5) for i in range(5)] == ["VO", "VO", "VI", "BE", "BK"]
    assert [default_category(i, 4) for i in range(4)] == ["VO", "VI", "BE", "BK"]
    mlo = default_scenario(small_problem())
    assert mlo.all_acs[0].cw_min == 4 and mlo.all_acs[0].txop == 3264
    assert evaluate_scenario(mlo).converged


def test_ga_config_checks():
    with pytest.raises(ValueError):
        GaConfig(population=8, elite=8)
    with pytest.raises(ValueError):
        GaConfig(crossover_rate=1.5)


def test_shared_evaluator_ignores_thresholds():
    prob = small_problem(links=1)
    chrom = encode(default_scenario(prob), multi_link=False)
    shared = Evaluator()
    first = shared(chrom, prob)
    tighter = Problem(prob.phy, tuple(replace(a, violation_threshold=1e-9) for a in prob.acs), 1)
    again = shared(chrom, tighter)
    assert shared.hits == 1
    assert again == evaluate(chrom, tighter)
    assert first.violations == again.violations and not again.feasible


def test_epsilon_sweep_matches_separate_runs():
    prob = small_problem()
    swept = epsilon_sweep(prob, SMALL, 0, [1e-3, 1e-1])
    for eps, cmp in swept:
        acs = (replace(prob.acs[0], violation_threshold=eps),) + prob.acs[1:]
        alone = compare_modes(Problem(prob.phy, acs, 2), SMALL)
        assert cmp.single.history == alone.single.history
        assert cmp.multi.best == alone.multi.best
