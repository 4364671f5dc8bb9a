"""Core membership testing by iterated coalition shrinking.

The exact test first rules out Pareto improvements by two max-min programs
over upward and downward unit-sum directions. It then keeps an active
coalition, initially everyone, and per round either finds a deviation for
that coalition inside the box below ``a`` or removes the agent whose action
reaches zero first along the best downward direction. After ``n`` rounds the
active coalition is empty and ``a`` is in the core.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import APPROX, EXACT, SolverConfig
from .economy import (
    UtilityOracle,
    as_outcome,
    directional_derivative,
    evaluate,
    jacobian,
    pad,
    project,
    validate_economy,
)
from .errors import BoundaryInfeasible, InvalidEconomy, NoDescent, SlideBudgetExhausted
from .optimizer import Box, MaxMinProblem, SignedSimplex, SolveResult, solve_maxmin

logger = logging.getLogger(__name__)

IN_CORE = "IN_CORE"
NOT_PARETO = "NOT_PARETO"
DEVIATION_FOUND = "DEVIATION_FOUND"
SCHEMA = "v1"
# second, tighter pass for a round whose descent check fails
REFINE_FACTOR = 1e-3

# step used to difference a directional derivative in its direction argument
_DIRECTION_STEP = 1e-4


@dataclass
class TraceEntry:
    round: int
    agent: int
    active: tuple
    x_star: np.ndarray
    v_star: Optional[np.ndarray]
    ratio: float
    deviation_value: float
    descent_value: Optional[float] = None
    dichotomy_ok: bool = True
    descent_ok: bool = True
    slide_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "agent": self.agent,
            "active": list(self.active),
            "x_star": self.x_star.tolist(),
            "v_star": None if self.v_star is None else self.v_star.tolist(),
            "ratio": self.ratio,
            "deviation_value": self.deviation_value,
            "descent_value": self.descent_value,
            "dichotomy_ok": self.dichotomy_ok,
            "descent_ok": self.descent_ok,
            "slide_steps": self.slide_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEntry":
        return cls(
            round=d["round"],
            agent=d["agent"],
            active=tuple(d["active"]),
            x_star=np.array(d["x_star"], dtype=float),
            v_star=None if d["v_star"] is None else np.array(d["v_star"], dtype=float),
            ratio=d["ratio"],
            deviation_value=d["deviation_value"],
            descent_value=d["descent_value"],
            dichotomy_ok=d["dichotomy_ok"],
            descent_ok=d["descent_ok"],
            slide_steps=d["slide_steps"],
        )


@dataclass
class CoreVerdict:
    status: str
    n: int
    point: np.ndarray
    deviation: Optional[tuple] = None  # (coalition, full-length point)
    improving_direction: Optional[np.ndarray] = None
    elimination_trace: list = field(default_factory=list)
    programs_solved: int = 0
    programs_skipped: int = 0
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def in_core(self) -> bool:
        return self.status == IN_CORE

    @property
    def slide_steps(self) -> list:
        return [e.slide_steps for e in self.elimination_trace]

    def to_dict(self) -> dict:
        dev = None
        if self.deviation is not None:
            dev = {"coalition": list(self.deviation[0]), "point": self.deviation[1].tolist()}
        return {
            "schema": SCHEMA,
            "status": self.status,
            "n": self.n,
            "point": self.point.tolist(),
            "deviation": dev,
            "improving_direction": (
                None if self.improving_direction is None else self.improving_direction.tolist()
            ),
            "elimination_trace": [e.to_dict() for e in self.elimination_trace],
            "programs_solved": self.programs_solved,
            "programs_skipped": self.programs_skipped,
            "config": dict(self.config),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoreVerdict":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported verdict schema {d.get('schema')!r}")
        dev = d["deviation"]
        return cls(
            status=d["status"],
            n=d["n"],
            point=np.array(d["point"], dtype=float),
            deviation=None if dev is None else (tuple(dev["coalition"]), np.array(dev["point"], dtype=float)),
            improving_direction=(
                None if d["improving_direction"] is None
                else np.array(d["improving_direction"], dtype=float)
            ),
            elimination_trace=[TraceEntry.from_dict(e) for e in d["elimination_trace"]],
            programs_solved=d["programs_solved"],
            programs_skipped=d["programs_skipped"],
            config=dict(d["config"]),
            notes=list(d["notes"]),
        )


@dataclass
class ParetoResult:
    efficient: bool
    direction: Optional[np.ndarray]
    up_value: Optional[float]
    down_value: Optional[float]
    programs_solved: int
    programs_skipped: int

    def to_dict(self) -> dict:
        return {
            "efficient": self.efficient,
            "direction": None if self.direction is None else self.direction.tolist(),
            "up_value": self.up_value,
            "down_value": self.down_value,
            "programs_solved": self.programs_solved,
            "programs_skipped": self.programs_skipped,
        }


def _direction_problem(oracle: UtilityOracle, x: np.ndarray, sign: int, free: list) -> MaxMinProblem:
    """max over unit-sum directions (signed, supported on ``free``) of min_i d_v u_i(x)."""
    n = oracle.n

    def embed(w):
        v = np.zeros(n)
        v[free] = w
        return v

    def components(w):
        return directional_derivative(oracle, x, embed(w))

    def supergradients(w):
        base = components(w)
        sg = np.empty((n, len(free)))
        for k in range(len(free)):
            e = np.zeros(len(free))
            e[k] = sign * _DIRECTION_STEP
            sg[:, k] = (components(w + e) - base) / (sign * _DIRECTION_STEP)
        return sg

    return MaxMinProblem(components, supergradients, SignedSimplex(sign, len(free)))


def best_direction(oracle: UtilityOracle, x, sign: int, cfg: SolverConfig, stop_above=None):
    """Solve the signed-direction program at ``x``.

    Coordinates that cannot move in the requested sense (``x_k = 1`` going up,
    ``x_k = 0`` going down) are pinned at zero. Returns ``(None, None)`` when
    no coordinate can move.
    """
    x = np.asarray(x, dtype=float)
    free = np.flatnonzero(x < 1.0) if sign > 0 else np.flatnonzero(x > 0.0)
    free = free.tolist()
    if not free:
        return None, None
    res = solve_maxmin(_direction_problem(oracle, x, sign, free), cfg, stop_above=stop_above)
    v = np.zeros(oracle.n)
    v[free] = res.argmax
    return v, res


def _deviation_problem(sub: UtilityOracle, target: np.ndarray, hi: np.ndarray) -> MaxMinProblem:
    def components(x):
        return evaluate(sub, x) - target

    def supergradients(x):
        return jacobian(sub, x)

    return MaxMinProblem(components, supergradients, Box(np.zeros(hi.size), hi))


def pareto_preprocess(oracle: UtilityOracle, a, cfg: Optional[SolverConfig] = None) -> ParetoResult:
    """Decide Pareto efficiency of ``a`` from one-sided directional derivatives."""
    cfg = cfg or SolverConfig()
    a = as_outcome(a, oracle.n)
    solved = skipped = 0
    values = {}
    dirs = {}
    for sign in (1, -1):
        v, res = best_direction(oracle, a, sign, cfg)
        if v is None:
            skipped += 1
            values[sign] = None
            continue
        solved += 1
        values[sign] = res.value
        dirs[sign] = v
    if values[1] is None and values[-1] is None:
        raise BoundaryInfeasible("no feasible direction at this outcome")
    best = max((s for s in values if values[s] is not None), key=lambda s: values[s])
    improving = values[best] > cfg.tau_dev
    return ParetoResult(
        efficient=not improving,
        direction=dirs[best] if improving else None,
        up_value=values[1],
        down_value=values[-1],
        programs_solved=solved,
        programs_skipped=skipped,
    )


def least_valuable_agent(x_star, v_star) -> int:
    """Index whose coordinate reaches zero first moving from ``x_star`` along ``v_star``."""
    x = np.asarray(x_star, dtype=float)
    v = np.asarray(v_star, dtype=float)
    at_zero = np.flatnonzero((x <= 0.0) & (v <= 0.0))
    if at_zero.size:
        return int(at_zero[0])
    down = np.flatnonzero(v < 0.0)
    if not down.size:
        raise NoDescent("direction has no strictly negative component")
    ratios = x[down] / -v[down]
    return int(down[np.argmin(ratios)])


@dataclass
class LindahlReport:
    is_lindahl: bool
    direction: str  # "a" or "-a"
    derivative: np.ndarray
    norm: float
    opposite: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "is_lindahl": self.is_lindahl,
            "direction": self.direction,
            "derivative": self.derivative.tolist(),
            "norm": self.norm,
            "opposite": None if self.opposite is None else self.opposite.tolist(),
        }


def lindahl_report(oracle: UtilityOracle, a, tol: float = 1e-6) -> LindahlReport:
    """Derivative of every utility along the ray through ``a``.

    Uses ``d_a u(a)`` when moving up along ``a`` stays in the box and falls
    back to ``d_{-a} u(a)`` when some ``a_i = 1`` blocks it.
    """
    a = as_outcome(a, oracle.n)
    if not np.any(a > 0):
        raise ValueError("the zero outcome does not define a direction")
    down = directional_derivative(oracle, a, -a)
    if np.any(a >= 1.0):
        d, label, other = down, "-a", None
    else:
        d, label, other = directional_derivative(oracle, a, a), "a", down
    norm = float(np.max(np.abs(d)))
    return LindahlReport(norm <= tol, label, d, norm, other)


def is_lindahl(oracle: UtilityOracle, a, tol: float = 1e-6) -> bool:
    return lindahl_report(oracle, a, tol).is_lindahl


def _check_economy(oracle: UtilityOracle, cfg: SolverConfig):
    report = validate_economy(oracle, samples=64, seed=cfg.seed, warn=False)
    if not report.valid:
        raise InvalidEconomy(
            f"{len(report.concavity_violations)} concavity and "
            f"{len(report.externality_violations)} externality violations"
        )
    return report


def _certify_deviation(oracle, a, coalition, x_c, tau) -> Optional[np.ndarray]:
    point = np.clip(pad(x_c, coalition, oracle.n), 0.0, 1.0)
    gaps = (evaluate(oracle, point) - evaluate(oracle, a))[list(coalition)]
    if np.all(gaps > tau):
        return point
    return None


def _deviation_round(oracle, a, active, cfg, upper, epsilon=None, x0=None):
    sub = project(oracle, active)
    target = evaluate(oracle, a)[list(active)]
    hi = a[list(active)] if upper is None else np.full(len(active), upper)
    start = hi if x0 is None else x0
    res = solve_maxmin(_deviation_problem(sub, target, hi), cfg, x0=start, epsilon=epsilon)
    if not res.converged:
        logger.warning("deviation program for coalition %s did not converge", active)
    return sub, target, res


def _eliminate(sub, active, x_hat, cfg, entry_kwargs):
    """Pick the least valuable agent at ``x_hat``; returns (entry, solved, skipped)."""
    zero = np.flatnonzero(x_hat <= 0.0)
    if zero.size:
        local = int(zero[0])
        entry = TraceEntry(agent=active[local], active=active, v_star=None, ratio=0.0, **entry_kwargs)
        return entry, 0, 1
    v_c, res4 = best_direction(sub, x_hat, -1, cfg)
    local = least_valuable_agent(x_hat, v_c)
    entry = TraceEntry(
        agent=active[local],
        active=active,
        v_star=v_c,
        ratio=float(x_hat[local] / -v_c[local]),
        descent_value=res4.value,
        descent_ok=bool(np.max(directional_derivative(sub, x_hat, v_c)) <= cfg.tau_dev),
        **entry_kwargs,
    )
    return entry, 1, 0


def _pad_trace(entry: TraceEntry, n: int) -> TraceEntry:
    entry.x_star = pad(entry.x_star, entry.active, n)
    if entry.v_star is not None:
        entry.v_star = pad(entry.v_star, entry.active, n)
    return entry


def test_core_membership(
    oracle: UtilityOracle, a, cfg: Optional[SolverConfig] = None, check_economy: bool = True
) -> CoreVerdict:
    """Decide whether ``a`` is in the core; dispatches on ``cfg.mode``."""
    cfg = cfg or SolverConfig()
    if cfg.mode == APPROX:
        return test_core_membership_approx(oracle, a, cfg, check_economy)
    a = as_outcome(a, oracle.n)
    n = oracle.n
    if check_economy:
        _check_economy(oracle, cfg)
    verdict = CoreVerdict(status=IN_CORE, n=n, point=a, config=cfg.to_dict())

    pre = pareto_preprocess(oracle, a, cfg)
    verdict.programs_solved += pre.programs_solved
    verdict.programs_skipped += pre.programs_skipped
    if not pre.efficient:
        verdict.status = NOT_PARETO
        verdict.improving_direction = pre.direction
        return _finish(verdict)

    active = tuple(range(n))
    for rnd in range(1, n + 1):
        x0 = None
        for eps in (cfg.epsilon, cfg.epsilon * REFINE_FACTOR):
            sub, target, res = _deviation_round(oracle, a, active, cfg, None, eps, x0)
            x_star = res.argmax
            gaps = evaluate(sub, x_star) - target
            if np.min(gaps) > cfg.tau_dev:
                point = _certify_deviation(oracle, a, active, x_star, cfg.tau_dev)
                if point is not None:
                    verdict.programs_solved += 1
                    verdict.status = DEVIATION_FOUND
                    verdict.deviation = (active, point)
                    return _finish(verdict)
            dichotomy = bool(np.all(gaps > cfg.tau_dev) or np.all(gaps <= cfg.tau_dev))
            entry, solved, skipped = _eliminate(
                sub, active, x_star, cfg,
                dict(round=rnd, x_star=x_star, deviation_value=res.value, dichotomy_ok=dichotomy),
            )
            if entry.descent_ok:
                break
            # a loose optimum can leave a small ascent along the descent
            # direction; tighten the same program once from where it stopped
            x0 = x_star
        verdict.programs_solved += 1 + solved
        verdict.programs_skipped += skipped
        verdict.elimination_trace.append(_pad_trace(entry, n))
        active = tuple(i for i in active if i != entry.agent)
    return _finish(verdict)


def test_core_membership_approx(
    oracle: UtilityOracle, a, cfg: SolverConfig, check_economy: bool = True
) -> CoreVerdict:
    """Approximate test for a black-box economy with bounded derivatives.

    Skips the Pareto preprocessing, solves each coalition's deviation program
    over the whole box to accuracy ``eps_core / (2 kappa)``, then slides the
    optimum down one agent at a time in steps of ``eps_core / (2 kappa)``
    until it lies strictly below the Pareto frontier or touches zero, before
    the usual descent program and ratio test. A deviation is reported only
    when every member gains more than ``eps_core`` (or more than half of it
    once sliding has begun), so gains smaller than that may go unreported.
    """
    if cfg.mode != APPROX:
        raise ValueError("approximate test needs cfg.mode == 'approx'")
    a = as_outcome(a, oracle.n)
    n = oracle.n
    if check_economy:
        report = _check_economy(oracle, cfg)
        if cfg.kappa < report.estimated_kappa:
            raise ValueError(
                f"kappa={cfg.kappa} is below the sampled estimate {report.estimated_kappa:.4g}"
            )
    eps, kappa = cfg.eps_core, cfg.kappa
    step = eps / (2.0 * kappa)
    budget = math.ceil(4 * n * kappa / eps)
    verdict = CoreVerdict(status=IN_CORE, n=n, point=a, config=cfg.to_dict())

    active = tuple(range(n))
    for rnd in range(1, n + 1):
        sub, target, res = _deviation_round(oracle, a, active, cfg, upper=1.0, epsilon=step)
        verdict.programs_solved += 1
        x_hat = res.argmax.copy()
        point = _certify_deviation(oracle, a, active, x_hat, eps)
        if point is not None:
            verdict.status = DEVIATION_FOUND
            verdict.deviation = (active, point)
            return _finish(verdict)

        slides = 0
        while np.all(x_hat > 0.0):
            v_up, res_up = best_direction(sub, x_hat, 1, cfg, stop_above=cfg.tau_dev)
            if v_up is not None and res_up.value > cfg.tau_dev:
                break
            gaps = evaluate(sub, x_hat) - target
            k = int(np.argmin(gaps))
            if gaps[k] > eps / 2:
                # nobody is left to slide: every member gains more than eps/2
                point = _certify_deviation(oracle, a, active, x_hat, max(eps / 2, cfg.tau_dev))
                if point is None:
                    raise SlideBudgetExhausted(f"slide stalled in round {rnd}")
                verdict.status = DEVIATION_FOUND
                verdict.deviation = (active, point)
                verdict.notes.append(f"deviation reached while sliding in round {rnd}")
                return _finish(verdict)
            x_hat[k] = max(0.0, x_hat[k] - step)
            slides += 1
            if slides > budget:
                raise SlideBudgetExhausted(f"slide exceeded {budget} steps in round {rnd}")

        entry, solved, skipped = _eliminate(
            sub, active, x_hat, cfg,
            dict(round=rnd, x_star=x_hat, deviation_value=res.value, slide_steps=slides),
        )
        verdict.programs_solved += solved
        verdict.programs_skipped += skipped
        verdict.elimination_trace.append(_pad_trace(entry, n))
        active = tuple(i for i in active if i != entry.agent)
    return _finish(verdict)


def _finish(verdict: CoreVerdict) -> CoreVerdict:
    bound = 2 * verdict.n if verdict.config.get("mode") == APPROX else 2 + 2 * verdict.n
    used = verdict.programs_solved + verdict.programs_skipped
    if used > bound:
        raise AssertionError(f"{used} programs exceed the bound {bound}")
    for e in verdict.elimination_trace:
        if not e.dichotomy_ok:
            verdict.notes.append(f"round {e.round}: deviation gaps straddle tau_dev")
        if not e.descent_ok:
            verdict.notes.append(f"round {e.round}: descent direction not certified non-improving")
    return verdict


def check_certificate(oracle: UtilityOracle, verdict: CoreVerdict, tau: Optional[float] = None) -> bool:
    """Re-check a verdict's witness by direct evaluation."""
    tau = verdict.config.get("tau_dev", 1e-5) if tau is None else tau
    a = verdict.point
    if verdict.status == DEVIATION_FOUND:
        coalition, point = verdict.deviation
        outside = [i for i in range(verdict.n) if i not in coalition]
        if np.any(point[outside] != 0.0):
            return False
        gaps = (evaluate(oracle, point) - evaluate(oracle, a))[list(coalition)]
        return bool(np.all(gaps > tau))
    if verdict.status == NOT_PARETO:
        d = directional_derivative(oracle, a, verdict.improving_direction, analytic=False)
        return bool(np.all(d > 0.0))
    return len(verdict.elimination_trace) == verdict.n


# keep pytest from collecting these when imported into test modules
test_core_membership.__test__ = False
test_core_membership_approx.__test__ = False
