"""Side-by-side checks of the core test against the grid oracle."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SolverConfig
from .coretest import DEVIATION_FOUND, IN_CORE, NOT_PARETO, CoreVerdict, test_core_membership
from .economy import UtilityOracle, as_outcome, evaluate, jacobian
from .families import FAMILIES, random_economy
from .groundtruth import (
    BruteForceVerdict,
    CharacterizationResult,
    GridSpec,
    brute_force_core_test,
    characterization_check,
)
from .optimizer import Box, MaxMinProblem, solve_maxmin

logger = logging.getLogger(__name__)

# candidate frontier points are solved tightly so they sit on the frontier
CANDIDATE_EPS = 1e-10


def improvement_problem(oracle: UtilityOracle, reference, hi=None) -> MaxMinProblem:
    """max over ``0 <= x <= hi`` of ``min_i u_i(x) - u_i(reference)``."""
    target = evaluate(oracle, reference)
    hi = np.ones(oracle.n) if hi is None else np.asarray(hi, dtype=float)
    return MaxMinProblem(
        lambda x: evaluate(oracle, x) - target,
        lambda x: jacobian(oracle, x),
        Box(np.zeros(oracle.n), hi),
    )


def verdict_strength(oracle: UtilityOracle, verdict: CoreVerdict, cfg: SolverConfig) -> Optional[float]:
    """Size of the improvement behind a negative verdict (None for IN_CORE).

    For a deviation this is the smallest member gain at the reported point;
    for a Pareto failure it is the best uniform gain the grand coalition can
    reach, found by a max-min solve over the whole box.
    """
    a = verdict.point
    if verdict.status == DEVIATION_FOUND:
        coalition, point = verdict.deviation
        gaps = (evaluate(oracle, point) - evaluate(oracle, a))[list(coalition)]
        return float(gaps.min())
    if verdict.status == NOT_PARETO:
        return solve_maxmin(improvement_problem(oracle, a), cfg).value
    return None


@dataclass
class Comparison:
    verdict: CoreVerdict
    oracle_verdict: BruteForceVerdict
    characterization: CharacterizationResult
    algorithm_strength: Optional[float]
    margin: float

    @property
    def algorithm_decided(self) -> Optional[bool]:
        if self.verdict.status == IN_CORE:
            return True
        if self.algorithm_strength is not None and self.algorithm_strength > self.margin:
            return False
        return None

    @property
    def agreement(self) -> Optional[bool]:
        """True/False when both sides are decided beyond the margin, else None."""
        alg, grid = self.algorithm_decided, self.oracle_verdict.decided
        if alg is None or grid is None:
            return None
        return alg == grid

    @property
    def skipped(self) -> bool:
        return self.agreement is None

    def to_dict(self) -> dict:
        return {
            "algorithm": self.verdict.to_dict(),
            "algorithm_strength": self.algorithm_strength,
            "algorithm_in_core": self.algorithm_decided,
            "oracle": self.oracle_verdict.to_dict(),
            "oracle_in_core": self.oracle_verdict.decided,
            "agreement": self.agreement,
            "characterization": self.characterization.to_dict(),
        }


def compare(oracle: UtilityOracle, a, cfg: Optional[SolverConfig] = None, grid: GridSpec = GridSpec()) -> Comparison:
    cfg = cfg or SolverConfig()
    a = as_outcome(a, oracle.n)
    verdict = test_core_membership(oracle, a, cfg)
    return Comparison(
        verdict=verdict,
        oracle_verdict=brute_force_core_test(oracle, a, grid),
        characterization=characterization_check(oracle, a, grid),
        algorithm_strength=verdict_strength(oracle, verdict, cfg),
        margin=grid.margin,
    )


def frontier_point(oracle: UtilityOracle, reference, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """A Pareto-efficient point that weakly improves on ``reference`` for everyone."""
    res = solve_maxmin(improvement_problem(oracle, reference), cfg or SolverConfig(), x0=reference,
                       epsilon=CANDIDATE_EPS)
    return res.argmax


def welfare_point(oracle: UtilityOracle, weights, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """Maximizer of the weighted utilitarian welfare ``weights . u(x)``.

    Skewed weights give Pareto points that shortchange some agents, which is
    where coalition deviations live.
    """
    w = np.asarray(weights, dtype=float)
    problem = MaxMinProblem(
        lambda x: np.array([w @ evaluate(oracle, x)]),
        lambda x: (w @ jacobian(oracle, x))[None, :],
        Box(np.zeros(oracle.n), np.ones(oracle.n)),
    )
    return solve_maxmin(problem, cfg or SolverConfig(), epsilon=CANDIDATE_EPS).argmax


def candidate_points(oracle: UtilityOracle, rng: np.random.Generator, count: int = 5) -> list:
    """Uniform point, frontier points (balanced and lopsided), the top corner."""
    n = oracle.n
    pts = [rng.random(n), frontier_point(oracle, np.zeros(n))]
    while len(pts) < count - 1:
        if len(pts) % 2:
            pts.append(welfare_point(oracle, rng.dirichlet(np.full(n, 0.3))))
        else:
            pts.append(frontier_point(oracle, rng.random(n) * 0.8))
    pts.append(np.ones(n))
    return [np.clip(p, 0.0, 1.0) for p in pts[:count]]


@dataclass
class Instance:
    family: str
    n: int
    seed: int
    point: np.ndarray
    oracle: UtilityOracle = field(repr=False)


def instance_suite(economies: int = 50, points: int = 5, seed: int = 0, sizes=(2, 3)) -> list:
    """Deterministic random instances cycling through families and sizes."""
    out = []
    for k in range(economies):
        family = FAMILIES[k % len(FAMILIES)]
        n = sizes[(k // len(FAMILIES)) % len(sizes)]
        econ_seed = seed * 100_000 + k
        oracle = random_economy(family, n, econ_seed)
        rng = np.random.default_rng(econ_seed + 7)
        for p in candidate_points(oracle, rng, points):
            out.append(Instance(family, n, econ_seed, p, oracle))
    return out


@dataclass
class SuiteReport:
    total: int = 0
    agreed: int = 0
    disagreed: list = field(default_factory=list)
    skipped: int = 0
    char_pass: int = 0
    char_fail: list = field(default_factory=list)
    char_skipped: int = 0
    statuses: dict = field(default_factory=dict)
    max_programs_ratio: float = 0.0
    seconds: float = 0.0
    rows: list = field(default_factory=list)

    @property
    def skipped_fraction(self) -> float:
        return self.skipped / self.total if self.total else 0.0


def run_suite(instances, cfg: Optional[SolverConfig] = None, grid: GridSpec = GridSpec(21, 0.1)) -> SuiteReport:
    cfg = cfg or SolverConfig()
    report = SuiteReport()
    start = time.perf_counter()
    for inst in instances:
        cmp = compare(inst.oracle, inst.point, cfg, grid)
        report.total += 1
        status = cmp.verdict.status
        report.statuses[status] = report.statuses.get(status, 0) + 1
        used = cmp.verdict.programs_solved + cmp.verdict.programs_skipped
        report.max_programs_ratio = max(report.max_programs_ratio, used / (2 + 2 * inst.n))
        if cmp.agreement is None:
            report.skipped += 1
        elif cmp.agreement:
            report.agreed += 1
        else:
            report.disagreed.append((inst, cmp))
        holds = cmp.characterization.holds
        if holds is None:
            report.char_skipped += 1
        elif holds:
            report.char_pass += 1
        else:
            report.char_fail.append((inst, cmp))
        report.rows.append((inst, cmp))
        logger.info("%s n=%d seed=%d point=%s -> %s agreement=%s", inst.family, inst.n,
                    inst.seed, np.round(inst.point, 4).tolist(), status, cmp.agreement)
    report.seconds = time.perf_counter() - start
    return report


def approx_config(oracle: UtilityOracle, eps_core: float, seed: int = 0, headroom: float = 1.1) -> SolverConfig:
    """Approx-mode settings with kappa set a little above the sampled estimate."""
    from .economy import validate_economy

    est = validate_economy(oracle, samples=64, seed=seed, warn=False).estimated_kappa
    return SolverConfig(mode="approx", eps_core=eps_core, kappa=headroom * est, seed=seed)


def certified_instances(kind: str, count: int, gain: float, seed: int = 0, grid: GridSpec = GridSpec(41)) -> list:
    """Random instances whose grid verdict is settled.

    ``kind="deviation"`` keeps points where some coalition gains at least
    ``gain`` on the lattice; ``kind="core"`` keeps points the lattice
    decides are in the core. At most two distinct points per economy are used.
    """
    if kind not in ("deviation", "core"):
        raise ValueError("kind must be 'deviation' or 'core'")
    out = []
    for inst in instance_suite(economies=10 * count, points=5, seed=seed):
        same = [o for o in out if o.seed == inst.seed]
        if len(same) >= 2 or any(np.allclose(o.point, inst.point, atol=1e-6) for o in same):
            continue
        bf = brute_force_core_test(inst.oracle, inst.point, grid)
        if kind == "deviation" and bf.coalition is not None and bf.strength >= gain:
            out.append(inst)
        elif kind == "core" and bf.decided is True:
            out.append(inst)
        if len(out) == count:
            break
    return out
