"""Genetic search over per-AC EDCA parameters and the AC-to-link assignment.

Objective: maximise sum_i -log10 P_loss,i subject to Pr(D_i >= D_max,i) < eps_i
for every AC.  Constraints are handled by feasibility-first tournaments:
a feasible candidate beats any infeasible one, infeasible candidates are
ranked by their total constraint excess and feasible ones by fitness.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import solve_link
from .config import scenario_to_dict
from .ccdf import delay_violation
from .scenario import (AcEdcaConfig, LinkScenario, MloScenario, PhyProfile,
                       TXOP_STEP_US, split_links, link_members)

LOSS_FLOOR = 1e-16
INFEASIBLE_FITNESS = -math.inf
MAX_EXP = 10                  # CW up to 2^10 = 1024

GENE_NAMES = ("cw_min_exp", "cw_ratio_exp", "aifsn", "txop_steps", "retry")


@dataclass(frozen=True)
class GeneBounds:
    """Inclusive integer ranges per gene (shared by every AC)."""
    cw_min_exp: Tuple[int, int] = (1, MAX_EXP)
    cw_ratio_exp: Tuple[int, int] = (0, MAX_EXP - 1)
    aifsn: Tuple[int, int] = (2, 15)
    txop_steps: Tuple[int, int] = (0, 256)
    retry: Tuple[int, int] = (4, 7)

    def ratio_range(self, cw_min_exp: int) -> Tuple[int, int]:
        hi = min(self.cw_ratio_exp[1], MAX_EXP - cw_min_exp)
        return min(self.cw_ratio_exp[0], hi), hi


@dataclass(frozen=True)
class Problem:
    """The ACs (workload + QoS targets) to place on ``num_links`` links.

    EDCA tunables inside ``acs`` are ignored by the search; they only matter
    when the problem itself is evaluated as a fixed configuration.
    """
    phy: PhyProfile
    acs: Tuple[AcEdcaConfig, ...]
    num_links: int = 1
    bounds: GeneBounds = GeneBounds()
    weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "acs", tuple(self.acs))

    @property
    def num_acs(self) -> int:
        return len(self.acs)

    def single_link(self) -> "Problem":
        return replace(self, num_links=1)


@dataclass(frozen=True)
class Chromosome:
    """Flat gene tuple: five EDCA genes per AC, then one link gene per AC
    in multi-link mode."""
    genes: Tuple[int, ...]
    num_acs: int

    @property
    def multi_link(self) -> bool:
        return len(self.genes) == 6 * self.num_acs

    def ac_genes(self, i: int) -> Tuple[int, ...]:
        return self.genes[5 * i: 5 * i + 5]

    @property
    def assignment(self) -> Tuple[int, ...]:
        if not self.multi_link:
            return (1,) * self.num_acs
        return self.genes[5 * self.num_acs:]

    def decode(self, problem: Problem) -> MloScenario:
        acs = []
        for i, base in enumerate(problem.acs):
            e_min, e_ratio, aifsn, steps, retry = self.ac_genes(i)
            cw_min = 2 ** e_min
            acs.append(replace(base, cw_min=cw_min, cw_max=cw_min * 2 ** e_ratio,
                               aifsn=aifsn, txop=float(TXOP_STEP_US * steps),
                               retry_limit=retry))
        return MloScenario(problem.phy, problem.num_links, tuple(acs), self.assignment)


def encode(mlo: MloScenario, multi_link: bool) -> Chromosome:
    """Inverse of :meth:`Chromosome.decode` for configurations on the gene grid."""
    genes = []
    for ac in mlo.all_acs:
        genes += [int(round(math.log2(ac.cw_min))), ac.max_stage, ac.aifsn,
                  int(round(ac.txop / TXOP_STEP_US)), ac.retry_limit]
    if multi_link:
        genes += list(mlo.assignment)
    return Chromosome(tuple(genes), len(mlo.all_acs))


@dataclass(frozen=True)
class EvalRecord:
    fitness: float
    margins: Tuple[float, ...]         # Pr(D_i >= D_max,i) - eps_i
    violations: Tuple[float, ...]
    losses: Tuple[float, ...]
    feasible: bool
    converged: bool
    diagnostics: Tuple[str, ...] = ()  # one entry per link

    @property
    def excess(self) -> float:
        """Total positive margin; the ranking key among infeasible candidates."""
        return float(sum(max(m, 0.0) for m in self.margins))


def rank_key(rec: EvalRecord) -> tuple:
    """Sort key, larger is better."""
    if rec.feasible:
        return (1, rec.fitness)
    return (0, -rec.excess, rec.fitness if rec.converged else -math.inf)


def fitness_of(losses: Sequence[float], weights: Optional[Sequence[float]] = None) -> float:
    w = weights or [1.0] * len(losses)
    return float(sum(wi * -math.log10(max(l, LOSS_FLOOR)) for wi, l in zip(w, losses)))


class Evaluator:
    """Memoised evaluation; results are cached per link composition, so
    chromosomes that share a link reuse its solve.

    The cache key ignores AC names and violation thresholds, which only
    enter the margins, so one evaluator can serve runs that differ in
    their thresholds alone.
    """

    def __init__(self):
        self._links: Dict[LinkScenario, tuple] = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def _key(link: LinkScenario) -> LinkScenario:
        return replace(link, acs=tuple(replace(a, violation_threshold=1.0, name="")
                                       for a in link.acs))

    def _link(self, link: LinkScenario) -> tuple:
        key = self._key(link)
        got = self._links.get(key)
        if got is None:
            self.misses += 1
            got = evaluate_link(key)
            self._links[key] = got
        else:
            self.hits += 1
        losses, viol, _, err = got
        if err:
            return got
        margins = tuple(-math.inf if math.isnan(v) else v - ac.violation_threshold
                        for v, ac in zip(viol, link.acs))
        return losses, viol, margins, err

    def __call__(self, chrom: Chromosome, problem: Problem) -> EvalRecord:
        return _assemble(chrom.decode(problem), problem, self._link)


def evaluate_link(link: LinkScenario) -> tuple:
    """(losses, violations, margins, error) for the ACs of one link."""
    sol, ctxs, err = solve_link(link)
    if err:
        inf = (math.inf,) * link.num_acs
        return (1.0,) * link.num_acs, inf, inf, err
    viol, margins = [], []
    for k, ac in enumerate(link.acs):
        if not math.isfinite(ac.delay_bound):
            viol.append(math.nan)
            margins.append(-math.inf)
            continue
        v = delay_violation(ctxs[k], ac.delay_bound, link.phy.discrete_step).probability
        viol.append(v)
        margins.append(v - ac.violation_threshold)
    return tuple(float(x) for x in sol.loss), tuple(viol), tuple(margins), ""


def _assemble(mlo: MloScenario, problem: Problem, link_eval) -> EvalRecord:
    I = len(mlo.all_acs)
    losses, viol, margins = [1.0] * I, [math.inf] * I, [math.inf] * I
    diag, converged = [], True
    for link, members in zip(split_links(mlo), link_members(mlo)):
        if not members:
            diag.append("empty")
            continue
        l, v, m, err = link_eval(link)
        converged &= not err
        diag.append(err or "ok")
        for k, i in enumerate(members):
            losses[i], viol[i], margins[i] = l[k], v[k], m[k]
    fitness = fitness_of(losses, problem.weights) if converged else INFEASIBLE_FITNESS
    feasible = converged and all(m < 0 for m in margins)
    return EvalRecord(fitness, tuple(margins), tuple(viol), tuple(losses),
                      feasible, converged, tuple(diag))


def evaluate(chrom: Chromosome, problem: Problem) -> EvalRecord:
    return _assemble(chrom.decode(problem), problem, evaluate_link)


def evaluate_scenario(mlo: MloScenario, weights=None) -> EvalRecord:
    """Evaluate a fixed configuration (e.g. the 802.11 defaults)."""
    problem = Problem(mlo.phy, mlo.all_acs, mlo.num_links, weights=weights)
    return _assemble(mlo, problem, evaluate_link)


# -- default 802.11 parameters -----------------------------------------------

# (CW_min, CW_max, AIFSN, TXOP us) per access category, DSSS-era TXOP limits
DEFAULT_EDCA = {
    "VO": (4, 8, 2, 3264),
    "VI": (8, 16, 2, 6016),
    "BE": (16, 1024, 3, 0),
    "BK": (16, 1024, 7, 0),
}
DEFAULT_RETRY = 7


def default_category(i: int, num_acs: int) -> str:
    """Spread ACs (ordered from most to least urgent) over VO, VI, BE, BK."""
    cats = ("VO", "VI", "BE", "BK")
    return cats[min(3, i * 4 // num_acs)]


def default_scenario(problem: Problem) -> MloScenario:
    """Every AC on link 1 with the standard parameters of its category."""
    acs = []
    for i, ac in enumerate(problem.acs):
        cw_min, cw_max, aifsn, txop = DEFAULT_EDCA[default_category(i, problem.num_acs)]
        acs.append(replace(ac, cw_min=cw_min, cw_max=cw_max, aifsn=aifsn,
                           txop=float(txop), retry_limit=DEFAULT_RETRY))
    return MloScenario(problem.phy, problem.num_links, tuple(acs))


# -- the genetic algorithm ---------------------------------------------------

@dataclass(frozen=True)
class GaConfig:
    population: int = 200
    generations: int = 60
    crossover_rate: float = 0.8
    elite: int = 8
    stagnation: int = 20
    mutation_rate: Optional[float] = None     # default 1 / number of genes
    tournament: int = 3
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.elite < self.population:
            raise ValueError("elite count must be below the population size")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.tournament < 1 or self.generations < 1:
            raise ValueError("tournament size and generations must be positive")


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best: float             # fitness of the best-ranked individual so far; -inf until feasible
    mean: float             # mean finite fitness of the population
    feasible_fraction: float


@dataclass
class GaResult:
    best: Chromosome
    record: EvalRecord
    history: List[GenerationStats]
    feasible: bool
    evaluations: int = 0


class _Space:
    def __init__(self, problem: Problem, multi_link: bool):
        self.problem = problem
        self.multi_link = multi_link
        self.b = problem.bounds
        self.I = problem.num_acs
        self.num_genes = (6 if multi_link else 5) * self.I

    def range_of(self, genes: Sequence[int], g: int) -> Tuple[int, int]:
        if g >= 5 * self.I:
            return 1, self.problem.num_links
        i, slot = divmod(g, 5)
        if slot == 1:
            return self.b.ratio_range(genes[5 * i])
        return getattr(self.b, GENE_NAMES[slot])

    def size_is_one(self) -> bool:
        b = self.b
        fixed = all(lo == hi for lo, hi in (b.cw_min_exp, b.aifsn, b.txop_steps, b.retry))
        ratio = b.ratio_range(b.cw_min_exp[0])
        return fixed and ratio[0] == ratio[1] and (not self.multi_link or self.problem.num_links == 1)

    def repair(self, genes: List[int]) -> Tuple[int, ...]:
        for g in range(self.num_genes):
            lo, hi = self.range_of(genes, g)
            genes[g] = min(max(genes[g], lo), hi)
        return tuple(genes)

    def random(self, rng) -> Tuple[int, ...]:
        genes = [0] * self.num_genes
        for g in range(self.num_genes):
            lo, hi = self.range_of(genes, g)
            genes[g] = int(rng.integers(lo, hi + 1))
        return tuple(genes)

    def mutate(self, genes: Tuple[int, ...], rate: float, rng) -> Tuple[int, ...]:
        out = list(genes)
        for g in range(self.num_genes):
            if rng.random() >= rate:
                continue
            lo, hi = self.range_of(out, g)
            if rng.random() < 0.5:
                out[g] = int(rng.integers(lo, hi + 1))
            else:
                out[g] += 1 if rng.random() < 0.5 else -1
        return self.repair(out)

    def crossover(self, a, b, rng):
        mask = rng.random(self.num_genes) < 0.5
        c1 = [x if m else y for x, y, m in zip(a, b, mask)]
        c2 = [y if m else x for x, y, m in zip(a, b, mask)]
        return self.repair(c1), self.repair(c2)


def _tournament(keys: List[tuple], size: int, rng) -> int:
    picks = rng.integers(0, len(keys), size=size)
    return int(max(picks, key=lambda i: (keys[i], -i)))


def _evaluate_population(genomes, problem, evaluator, cache, pool):
    todo = [g for g in dict.fromkeys(genomes) if g not in cache]
    chroms = [Chromosome(g, problem.num_acs) for g in todo]
    if pool is not None and len(chroms) > 1:
        records = list(pool.map(evaluate, chroms, [problem] * len(chroms)))
    else:
        records = [evaluator(c, problem) for c in chroms]
    cache.update(zip(todo, records))
    return [cache[g] for g in genomes]


def ga_optimize(problem: Problem, ga: GaConfig = GaConfig(), multi_link: Optional[bool] = None,
                initial: Sequence[Chromosome] = (), evaluator: Optional[Evaluator] = None) -> GaResult:
    """Run the GA; multi-link mode (link genes) defaults to ``num_links > 1``."""
    if multi_link is None:
        multi_link = problem.num_links > 1
    space = _Space(problem, multi_link)
    rng = np.random.default_rng(ga.seed)
    rate = ga.mutation_rate if ga.mutation_rate is not None else 1.0 / space.num_genes
    evaluator = evaluator or Evaluator()
    cache: Dict[Tuple[int, ...], EvalRecord] = {}
    pool = ProcessPoolExecutor(ga.workers) if ga.workers > 1 else None

    seeds = [space.repair(list(c.genes)) for c in initial if len(c.genes) == space.num_genes]
    pop = seeds[: ga.population]
    while len(pop) < ga.population:
        pop.append(space.random(rng))

    history: List[GenerationStats] = []
    best_g, best_rec, stale = None, None, 0
    try:
        for gen in range(1, ga.generations + 1):
            recs = _evaluate_population(pop, problem, evaluator, cache, pool)
            keys = [rank_key(r) for r in recs]
            order = sorted(range(len(pop)), key=lambda i: keys[i], reverse=True)
            top = order[0]
            if best_rec is None or keys[top] > rank_key(best_rec):
                best_g, best_rec, stale = pop[top], recs[top], 0
            else:
                stale += 1
            finite = [r.fitness for r in recs if math.isfinite(r.fitness)]
            history.append(GenerationStats(
                gen,
                best_rec.fitness if best_rec.feasible else INFEASIBLE_FITNESS,
                float(np.mean(finite)) if finite else INFEASIBLE_FITNESS,
                sum(r.feasible for r in recs) / len(recs),
            ))
            if space.size_is_one() or stale >= ga.stagnation or gen == ga.generations:
                break

            nxt = [pop[i] for i in order[: ga.elite]]
            while len(nxt) < ga.population:
                a = pop[_tournament(keys, ga.tournament, rng)]
                b = pop[_tournament(keys, ga.tournament, rng)]
                if rng.random() < ga.crossover_rate:
                    a, b = space.crossover(a, b, rng)
                nxt.append(space.mutate(a, rate, rng))
                if len(nxt) < ga.population:
                    nxt.append(space.mutate(b, rate, rng))
            pop = nxt
    finally:
        if pool is not None:
            pool.shutdown()

    return GaResult(Chromosome(best_g, problem.num_acs), best_rec, history,
                    best_rec.feasible, len(cache))


@dataclass
class ModeComparison:
    default: EvalRecord
    single: GaResult
    multi: GaResult

    @property
    def multi_dominates(self) -> bool:
        return self.multi.record.fitness >= self.single.record.fitness - 1e-9 or (
            self.multi.feasible and not self.single.feasible)


def compare_modes(problem: Problem, ga: GaConfig = GaConfig(),
                  evaluator: Optional[Evaluator] = None) -> ModeComparison:
    """Single-link vs multi-link optimisation with identical budgets and seeds.

    The multi-link run is seeded with the single-link optimum placed entirely
    on link 1, which is a point of its search space.
    """
    evaluator = evaluator or Evaluator()
    single_problem = problem.single_link()
    single = ga_optimize(single_problem, ga, multi_link=False, evaluator=evaluator)
    if problem.num_links == 1:
        multi = ga_optimize(single_problem, ga, multi_link=False, evaluator=evaluator)
    else:
        warm = encode(single.best.decode(problem), multi_link=True)
        multi = ga_optimize(problem, ga, multi_link=True, initial=[warm], evaluator=evaluator)
    default = evaluate_scenario(default_scenario(problem), problem.weights)
    return ModeComparison(default, single, multi)


def epsilon_sweep(problem: Problem, ga: GaConfig, ac: int,
                  values: Sequence[float]) -> List[Tuple[float, ModeComparison]]:
    """compare_modes for each violation threshold of AC ``ac`` (0-based).

    All points share one evaluator, since thresholds do not change the
    per-link results.
    """
    evaluator = Evaluator()
    out = []
    for eps in values:
        acs = list(problem.acs)
        acs[ac] = replace(acs[ac], violation_threshold=float(eps))
        out.append((float(eps), compare_modes(replace(problem, acs=tuple(acs)), ga, evaluator)))
    return out


# -- artifacts ---------------------------------------------------------------

HISTORY_COLUMNS = ("generation", "best_fitness", "mean_fitness", "feasible_fraction")


def _num(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("-inf" if x < 0 else "inf")


def write_history_csv(history: Sequence[GenerationStats], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for h in history:
            w.writerow([h.generation, _num(h.best), _num(h.mean), _num(h.feasible_fraction)])


def config_dict(mlo: MloScenario, record: Optional[EvalRecord] = None) -> dict:
    out = scenario_to_dict(mlo)
    if record is not None:
        out["evaluation"] = {
            "fitness": _num(record.fitness),
            "feasible": record.feasible,
            "loss": [_num(x) for x in record.losses],
            "violation": [_num(x) for x in record.violations],
            "margin": [_num(x) for x in record.margins],
            "diagnostics": list(record.diagnostics),
        }
    return out


def write_best_json(result: GaResult, problem: Problem, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_dict(result.best.decode(problem), result.record), fh, indent=2)
        fh.write("\n")
