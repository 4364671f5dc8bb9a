"""Concave max-min solver over boxes and signed simplices.

Maximizes ``f(x) = min_i g_i(x)`` for concave components ``g_i`` by
projected supergradient ascent. Every visited point contributes one
linearization per component; since each ``g_i`` is concave these lie above
it, so the LP ``max_y min_j L_j(y)`` over the feasible set bounds the optimum
from above and certifies the gap. The LP maximizer is also tried as an
iterate, and the ascent restarts from the best point after each check.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import linprog

from .config import SolverConfig
from .errors import InfeasibleSet, InvalidEconomy

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
CHECK_EVERY = 25
CUT_MEMORY = 48
# the upper bound may undercut an achieved value only through rounding
CONCAVITY_SLACK = 1e-7


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise InfeasibleSet(f"box bounds must be nonempty vectors of equal length")
        if np.any(lo > hi):
            raise InfeasibleSet(f"box has lo > hi at {np.flatnonzero(lo > hi).tolist()}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def contains(self, x, tol=1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def lp_bounds(self):
        return list(zip(self.lo, self.hi)), None


@dataclass(frozen=True)
class SignedSimplex:
    """``{v : sign * v >= 0, sum(v) = sign}``."""

    sign: int
    dim: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InfeasibleSet("sign must be +1 or -1")
        if self.dim < 1:
            raise InfeasibleSet("simplex dimension must be at least 1")

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.sign * project_simplex(self.sign * x)

    def contains(self, x, tol=1e-12) -> bool:
        x = np.asarray(x, dtype=float) * self.sign
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol * max(1, self.dim))

    def center(self) -> np.ndarray:
        return np.full(self.dim, self.sign / self.dim)

    def diameter(self) -> float:
        return math.sqrt(2.0) if self.dim > 1 else 0.0

    def lp_bounds(self):
        bound = (0.0, None) if self.sign > 0 else (None, 0.0)
        return [bound] * self.dim, (np.ones((1, self.dim)), np.array([float(self.sign)]))


FeasibleSet = Union[Box, SignedSimplex]


def project_simplex(x) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum(w) = 1}`` by sorting."""
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, x.size + 1)
    rho = np.count_nonzero(u - css / k > 0)
    theta = css[rho - 1] / rho
    w = np.maximum(x - theta, 0.0)
    # renormalize away the rounding drift of the threshold
    s = w.sum()
    if s > 0:
        w /= s
    return w


def project_onto(feasible: FeasibleSet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot project a non-finite point")
    return feasible.project(x)


@dataclass(frozen=True)
class MaxMinProblem:
    """Maximize ``min_i g_i(x)`` over ``feasible``.

    ``components(x)`` returns the vector ``(g_1(x), ..., g_m(x))`` and
    ``supergradients(x)`` an ``(m, dim)`` matrix whose rows are
    supergradients of the components at ``x``.
    """

    components: Callable[[np.ndarray], np.ndarray]
    supergradients: Callable[[np.ndarray], np.ndarray]
    feasible: FeasibleSet


@dataclass
class SolveResult:
    argmax: np.ndarray
    value: float
    iterations: int
    certified_gap: float
    upper_bound: float = math.inf
    status: str = "converged"  # converged | target | exhausted

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _upper_bound(feasible: FeasibleSet, cut_c, cut_s):
    """Solve ``max t s.t. t <= c_j + s_j . y, y feasible``."""
    s = np.vstack(cut_s)
    c = np.concatenate(cut_c)
    dim = s.shape[1]
    obj = np.zeros(dim + 1)
    obj[-1] = -1.0
    a_ub = np.hstack([-s, np.ones((s.shape[0], 1))])
    bounds, eq = feasible.lp_bounds()
    bounds = list(bounds) + [(None, None)]
    a_eq = b_eq = None
    if eq is not None:
        a_eq = np.hstack([eq[0], np.zeros((1, 1))])
        b_eq = eq[1]
    res = linprog(obj, A_ub=a_ub, b_ub=c, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return math.inf, None
    return float(-res.fun), res.x[:dim]


def solve_maxmin(
    problem: MaxMinProblem,
    cfg: Optional[SolverConfig] = None,
    x0=None,
    stop_above: Optional[float] = None,
    epsilon: Optional[float] = None,
) -> SolveResult:
    """Maximize ``min_i g_i`` to within ``epsilon`` (default ``cfg.epsilon``).

    With ``stop_above`` set, the solve ends as soon as a feasible value above
    it is reached or the certified upper bound falls to it or below; the
    result's status is then ``"target"`` unless the gap also closed.
    """
    cfg = cfg or SolverConfig()
    eps = cfg.epsilon if epsilon is None else epsilon
    feas = problem.feasible
    x = project_onto(feas, feas.center() if x0 is None else x0)

    def f_and_cuts(pt):
        vals = np.asarray(problem.components(pt), dtype=float)
        sg = np.asarray(problem.supergradients(pt), dtype=float).reshape(vals.size, -1)
        return vals, sg

    radius0 = feas.diameter()
    vals, sg = f_and_cuts(x)
    best_x, best_f = x.copy(), float(vals.min())
    if radius0 == 0.0:
        return SolveResult(best_x, best_f, 0, 0.0, best_f)

    cuts: deque = deque(maxlen=CUT_MEMORY)
    best_cut = (vals - sg @ x, sg)
    radius = radius0
    grad_scale = 0.0
    t = 0
    improved = False
    ub = math.inf

    def finish(status, it, gap):
        value = float(np.min(problem.components(best_x)))
        # the LP bound can sit an ulp below the achieved value
        return SolveResult(best_x, value, it, gap, max(ub, value), status)

    for it in range(1, cfg.max_iterations + 1):
        f = float(vals.min())
        if f > best_f:
            best_x, best_f = x.copy(), f
            best_cut = (vals - sg @ x, sg)
            improved = True
        if stop_above is not None and best_f > stop_above:
            return finish("target", it, math.inf)
        cuts.append((vals - sg @ x, sg))

        active = int(np.flatnonzero(vals <= f + TIE_TOL)[0])
        g = sg[active]
        gnorm = float(np.linalg.norm(g))

        if it % CHECK_EVERY == 0 or gnorm == 0.0:
            cut_c = [best_cut[0]] + [c for c, _ in cuts]
            cut_s = [best_cut[1]] + [s for _, s in cuts]
            ub, y = _upper_bound(feas, cut_c, cut_s)
            if y is not None:
                y = project_onto(feas, y)
                y_vals, y_sg = f_and_cuts(y)
                if float(y_vals.min()) > best_f:
                    best_x, best_f = y.copy(), float(y_vals.min())
                    best_cut = (y_vals - y_sg @ y, y_sg)
                    improved = True
                cuts.append((y_vals - y_sg @ y, y_sg))
            if ub < best_f - CONCAVITY_SLACK * (1.0 + abs(best_f)):
                raise InvalidEconomy(
                    f"upper bound {ub:.6g} below achieved value {best_f:.6g}: "
                    "objective is not concave"
                )
            gap = max(ub - best_f, 0.0)
            if gap <= eps:
                return finish("converged", it, gap)
            if stop_above is not None and ub <= stop_above:
                return finish("target", it, gap)
            if not improved:
                radius = max(radius / 2, radius0 * 1e-12)
            improved = False
            x, t = best_x.copy(), 0
            vals, sg = f_and_cuts(x)
            continue

        grad_scale = max(grad_scale, gnorm)
        step = radius / (grad_scale * math.sqrt(t + 1))
        x = project_onto(feas, x + step * g)
        t += 1
        vals, sg = f_and_cuts(x)

    logger.warning("max-min solve hit the iteration cap of %d", cfg.max_iterations)
    return finish("exhausted", cfg.max_iterations, math.inf)
