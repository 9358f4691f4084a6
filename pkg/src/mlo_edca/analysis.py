"""End-to-end per-AC QoS metrics for a multi-link scenario."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

from .ccdf import CcdfResult, delay_violation
from .delay_gf import GfContext, GfEvaluationError, build_contexts
from .fixed_point import ConvergenceError, FixedPointSolution, solve
from .scenario import LinkScenario, MloScenario, link_members, split_links


@dataclass(frozen=True)
class AcResult:
    ac: int                        # index into MloScenario.all_acs
    link: int                      # 1-based
    p: float
    c: float
    loss: float
    violation: float               # Pr(D >= D_max); nan without a finite bound
    theta: float
    margin: float                  # violation - epsilon


@dataclass(frozen=True)
class LinkResult:
    link: int
    members: List[int]
    solution: Optional[FixedPointSolution]
    contexts: Optional[List[GfContext]]
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass(frozen=True)
class Analysis:
    links: List[LinkResult]
    acs: List[AcResult]            # all_acs order; missing entries when a link failed

    @property
    def ok(self) -> bool:
        return all(l.ok for l in self.links)


def solve_link(link: LinkScenario, attempt_model: str = "slot") -> tuple:
    """(solution, contexts, error message)."""
    try:
        sol = solve(link, attempt_model=attempt_model)
        return sol, build_contexts(link, sol), ""
    except ConvergenceError as exc:
        return None, None, str(exc)
    except (ValueError, GfEvaluationError) as exc:
        return None, None, f"delay model failed: {exc}"


def analyze(mlo: MloScenario, attempt_model: str = "slot") -> Analysis:
    links, results = [], {}
    for m, (link, members) in enumerate(zip(split_links(mlo), link_members(mlo)), start=1):
        if not members:
            links.append(LinkResult(m, members, None, None))
            continue
        sol, ctxs, err = solve_link(link, attempt_model)
        links.append(LinkResult(m, members, sol, ctxs, err))
        if err:
            continue
        for k, i in enumerate(members):
            ac = link.acs[k]
            if math.isfinite(ac.delay_bound):
                res: CcdfResult = delay_violation(ctxs[k], ac.delay_bound, link.phy.discrete_step)
                viol, theta = res.probability, res.theta
            else:
                viol, theta = math.nan, math.nan
            margin = viol - ac.violation_threshold if math.isfinite(viol) else -math.inf
            results[i] = AcResult(i, m, float(sol.p[k]), float(sol.c[k]), float(sol.loss[k]),
                                  viol, theta, margin)
    return Analysis(links, [results[i] for i in sorted(results)])
