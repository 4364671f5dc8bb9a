"""Public goods economies: outcomes, coalitions, utility oracles.

Agents are indexed ``0..n-1`` and every agent picks an action in ``[0, 1]``.
A :class:`UtilityOracle` maps an outcome (length ``n``) to a utility vector
(length ``n``). Oracles may carry an analytic one-sided directional
derivative; when they do not, a forward finite-difference estimate is used.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Iterable, Optional

import numpy as np

from .errors import (
    BoundaryInfeasible,
    DimensionMismatch,
    DomainViolation,
    EmptyCoalition,
    NonFiniteDerivative,
)

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
FD_AGREEMENT = 1e-4


@dataclass(frozen=True)
class UtilityOracle:
    """Immutable utility function of an ``n``-agent economy.

    ``func`` maps an array of shape ``(..., n)`` to utilities of the same
    shape when ``batched`` is true, and a single outcome to a vector
    otherwise. ``derivative(a, v)`` is the analytic one-sided directional
    derivative, or ``None``.
    """

    n: int
    func: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    batched: bool = False
    family: str = "custom"
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __call__(self, a) -> np.ndarray:
        return evaluate(self, a)


def as_outcome(a, n: Optional[int] = None) -> np.ndarray:
    """Validate ``a`` as a point of the unit box and return it as floats."""
    x = np.asarray(a, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"outcome must be a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionMismatch(f"outcome has length {x.shape[0]}, economy has {n} agents")
    if not np.all(np.isfinite(x)):
        raise DomainViolation("outcome has non-finite coordinates")
    bad = np.flatnonzero((x < 0.0) | (x > 1.0))
    if bad.size:
        raise DomainViolation(f"coordinates {bad.tolist()} lie outside [0, 1]")
    return x


def make_coalition(members: Iterable[int], n: int) -> tuple[int, ...]:
    """Return ``members`` as a strictly increasing tuple of agent indices."""
    c = tuple(sorted({int(i) for i in members}))
    if not c:
        raise EmptyCoalition("a coalition needs at least one agent")
    if c[0] < 0 or c[-1] >= n:
        raise ValueError(f"coalition {c} has indices outside 0..{n - 1}")
    return c


def pad(x_c: np.ndarray, coalition: tuple[int, ...], n: int) -> np.ndarray:
    """Embed a coalition's actions into a full outcome, zeros elsewhere."""
    x_c = np.asarray(x_c, dtype=float)
    out = np.zeros(x_c.shape[:-1] + (n,))
    out[..., list(coalition)] = x_c
    return out


def evaluate(oracle: UtilityOracle, a) -> np.ndarray:
    x = as_outcome(a, oracle.n)
    u = np.asarray(oracle.func(x), dtype=float)
    if u.shape != (oracle.n,):
        raise DimensionMismatch(f"oracle returned shape {u.shape}, expected ({oracle.n},)")
    if not np.all(np.isfinite(u)):
        raise DomainViolation(f"oracle returned non-finite utilities at {x}")
    return u


def evaluate_many(oracle: UtilityOracle, points) -> np.ndarray:
    """Evaluate a stack of outcomes of shape ``(m, n)``; no box validation."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != oracle.n:
        raise DimensionMismatch(f"points have {pts.shape[-1]} coordinates, economy has {oracle.n}")
    if oracle.batched:
        return np.asarray(oracle.func(pts), dtype=float)
    flat = pts.reshape(-1, oracle.n)
    out = np.array([oracle.func(p) for p in flat], dtype=float)
    return out.reshape(pts.shape)


def max_step(a: np.ndarray, v: np.ndarray) -> float:
    """Largest ``t`` with ``a + t v`` inside the unit box (``inf`` for v = 0)."""
    t = np.inf
    up = v > 0
    down = v < 0
    if np.any(up):
        t = min(t, float(np.min((1.0 - a[up]) / v[up])))
    if np.any(down):
        t = min(t, float(np.min(a[down] / -v[down])))
    return t


def check_direction(a: np.ndarray, v: np.ndarray) -> None:
    blocked = np.flatnonzero(((v < 0) & (a <= 0.0)) | ((v > 0) & (a >= 1.0)))
    if blocked.size:
        raise BoundaryInfeasible(
            f"direction leaves the box immediately for agents {blocked.tolist()}", blocked
        )


def _as_direction(oracle: UtilityOracle, v) -> np.ndarray:
    d = np.asarray(v, dtype=float)
    if d.shape != (oracle.n,):
        raise DimensionMismatch(f"direction has shape {d.shape}, economy has {oracle.n} agents")
    if not np.all(np.isfinite(d)):
        raise DomainViolation("direction has non-finite components")
    return d


def finite_difference(oracle: UtilityOracle, a, v) -> np.ndarray:
    """One-sided forward-difference estimate of ``d_v u(a)``.

    Two quotients at steps ``h`` and ``h/2`` must agree; the returned value
    is their Richardson combination ``2 D(h/2) - D(h)``, which keeps the
    one-sided character while cancelling the first-order error.
    """
    x = as_outcome(a, oracle.n)
    d = _as_direction(oracle, v)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        return np.zeros(oracle.n)
    check_direction(x, d)
    dist = max_step(x, d) * norm
    h = min(max(FD_STEP, 1e-7 * dist), dist) / norm
    u0 = evaluate(oracle, x)

    def quotient(step):
        y = np.clip(x + step * d, 0.0, 1.0)
        return (np.asarray(oracle.func(y), dtype=float) - u0) / step

    d1 = quotient(h)
    d2 = quotient(h / 2)
    if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
        raise NonFiniteDerivative(f"non-finite difference quotient at {x} along {d}")
    scale = np.maximum(1.0, np.maximum(np.abs(d1), np.abs(d2)))
    if np.any(np.abs(d1 - d2) > FD_AGREEMENT * scale):
        raise NonFiniteDerivative(
            f"difference quotients at h={h:.3g} and h/2 disagree: {d1} vs {d2}"
        )
    return 2.0 * d2 - d1


def directional_derivative(oracle: UtilityOracle, a, v, analytic: bool = True) -> np.ndarray:
    """One-sided directional derivative ``d_v u(a)`` of every agent's utility."""
    if not analytic or oracle.derivative is None:
        return finite_difference(oracle, a, v)
    x = as_outcome(a, oracle.n)
    d = _as_direction(oracle, v)
    check_direction(x, d)
    out = np.asarray(oracle.derivative(x, d), dtype=float)
    if not np.all(np.isfinite(out)):
        raise NonFiniteDerivative(f"analytic derivative is non-finite at {x}")
    return out


def jacobian(oracle: UtilityOracle, a) -> np.ndarray:
    """Rows are (super)gradients of each agent's utility at ``a``.

    Column ``k`` is the derivative along ``+e_k``, or minus the derivative
    along ``-e_k`` when ``a_k = 1``.
    """
    x = as_outcome(a, oracle.n)
    jac = np.empty((oracle.n, oracle.n))
    for k in range(oracle.n):
        e = np.zeros(oracle.n)
        if x[k] < 1.0:
            e[k] = 1.0
            jac[:, k] = directional_derivative(oracle, x, e)
        else:
            e[k] = -1.0
            jac[:, k] = -directional_derivative(oracle, x, e)
    return jac


def project(oracle: UtilityOracle, coalition) -> UtilityOracle:
    """Economy seen by ``coalition`` when every outsider plays 0."""
    members = make_coalition(coalition, oracle.n)
    n = oracle.n
    idx = list(members)
    if len(members) == n:
        return oracle

    base = oracle.func

    def func(x_c):
        return np.asarray(base(pad(x_c, members, n)), dtype=float)[..., idx]

    deriv = None
    if oracle.derivative is not None:
        base_deriv = oracle.derivative

        def deriv(x_c, v_c):
            return np.asarray(base_deriv(pad(x_c, members, n), pad(v_c, members, n)))[idx]

    return UtilityOracle(
        n=len(members),
        func=func,
        derivative=deriv,
        batched=oracle.batched,
        family="projected",
        params={"parent": oracle.params, "coalition": members},
    )


@dataclass
class EconomyValidationReport:
    concavity_violations: list = field(default_factory=list)
    externality_violations: list = field(default_factory=list)
    samples_checked: int = 0
    estimated_kappa: float = 0.0
    range_violations: int = 0

    @property
    def valid(self) -> bool:
        return not self.concavity_violations and not self.externality_violations

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "samples_checked": self.samples_checked,
            "estimated_kappa": self.estimated_kappa,
            "range_violations": self.range_violations,
            "concavity_violations": [
                {"a": list(map(float, p[0])), "b": list(map(float, p[1])), "gap": float(g)}
                for (p, g) in self.concavity_violations
            ],
            "externality_violations": [
                {"a": list(map(float, p[0])), "b": list(map(float, p[1])), "agent": int(i)}
                for (p, i) in self.externality_violations
            ],
        }


def _kappa_points(n: int, rng: np.random.Generator, samples: int) -> np.ndarray:
    pts = [rng.random((samples, n))]
    if n <= 8:
        pts.append(np.array(list(product((0.0, 1.0), repeat=n))))
    return np.vstack(pts)


def validate_economy(
    oracle: UtilityOracle, samples: int = 256, seed: int = 0, tol: float = 1e-9, warn: bool = True
) -> EconomyValidationReport:
    """Spot-check concavity and positive externalities on random samples.

    Violations are collected, never raised. ``estimated_kappa`` is the largest
    sampled gradient norm of any agent's utility, i.e. the largest
    directional derivative along a unit direction.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    n = oracle.n
    rng = np.random.default_rng(seed)
    report = EconomyValidationReport(samples_checked=samples)

    a = rng.random((samples, n))
    b = rng.random((samples, n))
    ua = evaluate_many(oracle, a)
    ub = evaluate_many(oracle, b)
    um = evaluate_many(oracle, (a + b) / 2)
    gaps = um - (ua + ub) / 2
    scale = 1.0 + np.maximum(np.abs(ua), np.abs(ub))
    for k in np.flatnonzero(np.any(gaps < -tol * scale, axis=1)):
        report.concavity_violations.append(((a[k], b[k]), float(gaps[k].min())))

    if n > 1:
        lo = rng.random((samples, n))
        hi = lo + rng.uniform(0.05, 1.0, (samples, n)) * (1.0 - lo)
        agents = np.arange(samples) % n
        hi[np.arange(samples), agents] = lo[np.arange(samples), agents]
        raised = np.any(hi > lo, axis=1)
        u_hi = evaluate_many(oracle, hi)
        u_lo = evaluate_many(oracle, lo)
        for k in np.flatnonzero(raised):
            i = agents[k]
            if not u_hi[k, i] > u_lo[k, i]:
                report.externality_violations.append(((hi[k], lo[k]), int(i)))

    all_u = np.concatenate([ua, ub, um])
    report.range_violations = int(np.sum(np.any((all_u < 0.0) | (all_u > 1.0), axis=1)))
    if report.range_violations and warn:
        logger.warning(
            "%d sampled utility vectors leave [0, 1]; only ordinal comparisons are affected",
            report.range_violations,
        )

    kappa = 0.0
    for p in _kappa_points(n, rng, max(1, min(samples, 64))):
        jac = jacobian(oracle, p)
        kappa = max(kappa, float(np.max(np.linalg.norm(jac, axis=1))))
    report.estimated_kappa = kappa
    return report
