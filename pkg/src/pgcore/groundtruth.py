"""Exponential-time grid oracle for small economies.

Everything here scans the lattice ``{k / (r - 1)}^n`` directly and never
calls the max-min solver, so it can be used to check the core test. All
strict comparisons carry a ``margin``; a question whose answer hinges on a
quantity between 0 and ``margin`` is reported as undecided (``None``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Optional

import numpy as np
from scipy import ndimage

from .economy import UtilityOracle, as_outcome, evaluate, evaluate_many
from .errors import InstanceTooLarge

MAX_AGENTS = 5
CHUNK = 1 << 17
# gains at or below this count as no gain, matching the default tau_dev
INDIFFERENCE = 1e-5
# half-width of each zoom window, in cells of the previous pass
ZOOM_CELLS = 2


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 21
    margin: Optional[float] = None
    # zoom passes around the best lattice point; 0 scans the plain lattice
    refine: int = 3
    indifference: float = INDIFFERENCE

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        if self.refine < 0:
            raise ValueError("refine must be nonnegative")
        if self.margin is None:
            object.__setattr__(self, "margin", 2.0 / (self.resolution - 1))
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if not 0 <= self.indifference < self.margin:
            raise ValueError("indifference must lie in [0, margin)")

    @property
    def step(self) -> float:
        return 1.0 / (self.resolution - 1)

    def axis(self) -> np.ndarray:
        r = self.resolution
        return np.arange(r) / (r - 1)


def coalitions(n: int) -> Iterator[tuple]:
    """All nonempty coalitions, by increasing size then lexicographically."""
    for size in range(1, n + 1):
        yield from combinations(range(n), size)


def _check_size(n: int) -> None:
    if n > MAX_AGENTS:
        raise InstanceTooLarge(f"grid oracle supports at most {MAX_AGENTS} agents, got {n}")


def _lattice_chunks(coalition: tuple, n: int, grid: GridSpec, axes=None):
    """Yield full-length lattice points supported on ``coalition``, in C order.

    ``axes`` optionally gives one coordinate array per member instead of the
    uniform grid axis.
    """
    k = len(coalition)
    axes = [grid.axis()] * k if axes is None else axes
    total = grid.resolution ** k
    shape = (grid.resolution,) * k
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(start + CHUNK, total))
        idx = np.unravel_index(flat, shape)
        pts = np.zeros((flat.size, n))
        for j, agent in enumerate(coalition):
            pts[:, agent] = axes[j][idx[j]]
        yield pts


def decide(strength: float, margin: float, indifference: float = INDIFFERENCE) -> Optional[bool]:
    """True if ``strength`` clearly exceeds the margin, False if it is negligible."""
    if strength > margin:
        return True
    if strength <= indifference:
        return False
    return None


@dataclass
class CoalitionScan:
    coalition: tuple
    strength: float  # max over lattice points of min_{i in C} u_i(x) - u_i(a)
    best_point: np.ndarray
    first_deviation: Optional[np.ndarray]  # first point with every gap > margin


def scan_coalition(oracle: UtilityOracle, a, coalition: tuple, grid: GridSpec, ua=None) -> CoalitionScan:
    """Best min-gap of ``coalition`` over the lattice, then over zoomed lattices.

    The min-gap is concave, so each zoom pass rescans ``resolution`` points
    per axis across the cells next to the current best point.
    """
    a = np.asarray(a, dtype=float)
    ua = evaluate(oracle, a) if ua is None else ua
    members = list(coalition)
    strength = -np.inf
    best = None
    first = None
    axes = None
    half = ZOOM_CELLS * grid.step
    for _ in range(grid.refine + 1):
        for pts in _lattice_chunks(coalition, oracle.n, grid, axes):
            gaps = evaluate_many(oracle, pts)[:, members] - ua[members]
            s = gaps.min(axis=1)
            k = int(np.argmax(s))
            if s[k] > strength:
                strength, best = float(s[k]), pts[k].copy()
            if first is None:
                hits = np.flatnonzero(s > grid.margin)
                if hits.size:
                    first = pts[hits[0]].copy()
        centre = best[members]
        axes = [np.linspace(max(c - half, 0.0), min(c + half, 1.0), grid.resolution) for c in centre]
        half = ZOOM_CELLS * 2 * half / (grid.resolution - 1)
    return CoalitionScan(tuple(coalition), strength, best, first)


@dataclass
class BruteForceVerdict:
    in_core: bool
    coalition: Optional[tuple]
    point: Optional[np.ndarray]
    strength: float
    strongest_coalition: tuple
    strongest_point: np.ndarray
    margin: float
    indifference: float = INDIFFERENCE

    @property
    def decided(self) -> Optional[bool]:
        """True (in core), False (deviation beyond margin) or None."""
        d = decide(self.strength, self.margin, self.indifference)
        return None if d is None else not d

    def to_dict(self) -> dict:
        return {
            "in_core": self.in_core,
            "decided": self.decided,
            "coalition": None if self.coalition is None else list(self.coalition),
            "point": None if self.point is None else self.point.tolist(),
            "strength": self.strength,
            "strongest_coalition": list(self.strongest_coalition),
            "strongest_point": self.strongest_point.tolist(),
            "margin": self.margin,
        }


def brute_force_core_test(oracle: UtilityOracle, a, grid: GridSpec = GridSpec()) -> BruteForceVerdict:
    """Search every coalition's lattice for a deviation beyond ``grid.margin``.

    The reported deviation is the first one in coalition order (size, then
    lexicographic) and lattice order; ``strength`` is the best deviation
    margin found over all coalitions.
    """
    _check_size(oracle.n)
    a = as_outcome(a, oracle.n)
    ua = evaluate(oracle, a)
    first = None
    strongest = None
    for c in coalitions(oracle.n):
        scan = scan_coalition(oracle, a, c, grid, ua)
        if first is None and scan.first_deviation is not None:
            first = (c, scan.first_deviation)
        if strongest is None or scan.strength > strongest.strength:
            strongest = scan
    return BruteForceVerdict(
        in_core=first is None,
        coalition=None if first is None else first[0],
        point=None if first is None else first[1],
        strength=strongest.strength,
        strongest_coalition=strongest.coalition,
        strongest_point=strongest.best_point,
        margin=grid.margin,
        indifference=grid.indifference,
    )


def grid_deviations(oracle: UtilityOracle, a, grid: GridSpec, within=None, min_strength=None):
    """All lattice deviations stronger than ``min_strength`` (default margin).

    Restricted to coalitions contained in ``within`` when given. Returns a
    list of ``(coalition, points)`` with ``points`` of shape ``(m, n)``.
    """
    _check_size(oracle.n)
    a = as_outcome(a, oracle.n)
    ua = evaluate(oracle, a)
    thresh = grid.margin if min_strength is None else min_strength
    allowed = set(range(oracle.n)) if within is None else set(within)
    found = []
    for c in coalitions(oracle.n):
        if not set(c) <= allowed:
            continue
        hits = []
        for pts in _lattice_chunks(c, oracle.n, grid):
            gaps = evaluate_many(oracle, pts)[:, list(c)] - ua[list(c)]
            hits.append(pts[gaps.min(axis=1) > thresh])
        pts = np.vstack(hits)
        if pts.size:
            found.append((c, pts))
    return found


@dataclass
class ParetoIR:
    pareto: bool
    individually_rational: bool
    pareto_strength: float
    ir_strength: float
    margin: float
    indifference: float = INDIFFERENCE

    @property
    def pareto_decided(self) -> Optional[bool]:
        d = decide(self.pareto_strength, self.margin, self.indifference)
        return None if d is None else not d

    @property
    def ir_decided(self) -> Optional[bool]:
        d = decide(self.ir_strength, self.margin, self.indifference)
        return None if d is None else not d

    def to_dict(self) -> dict:
        return {
            "pareto": self.pareto,
            "individually_rational": self.individually_rational,
            "pareto_strength": self.pareto_strength,
            "ir_strength": self.ir_strength,
            "pareto_decided": self.pareto_decided,
            "ir_decided": self.ir_decided,
        }


def brute_force_pareto_and_ir(oracle: UtilityOracle, a, grid: GridSpec = GridSpec()) -> ParetoIR:
    """Grid tests for the grand coalition and for every singleton.

    Pareto efficiency is tested through strict improvements for everyone;
    with positive externalities any weak Pareto improvement can be turned
    into a strict one, so the two notions coincide.
    """
    _check_size(oracle.n)
    a = as_outcome(a, oracle.n)
    ua = evaluate(oracle, a)
    n = oracle.n
    grand = scan_coalition(oracle, a, tuple(range(n)), grid, ua)
    solo = max(scan_coalition(oracle, a, (i,), grid, ua).strength for i in range(n))
    return ParetoIR(
        pareto=not grand.strength > grid.margin,
        individually_rational=not solo > grid.margin,
        pareto_strength=grand.strength,
        ir_strength=solo,
        margin=grid.margin,
        indifference=grid.indifference,
    )


@dataclass
class DominatedSetGrid:
    membership: np.ndarray  # bool lattice, axis k = agent k
    component_labels: np.ndarray
    components: int
    slack: float
    nearest_is_member: bool
    zero_is_member: bool

    @property
    def connected(self) -> bool:
        return self.components <= 1


def dominated_set_grid(oracle: UtilityOracle, a, grid: GridSpec = GridSpec(), slack=None) -> DominatedSetGrid:
    """Lattice points with ``u(x) <= u(a) + slack`` and their components.

    Components use axis-adjacent (2n-neighbour) connectivity. ``slack``
    defaults to half the margin so that thin parts of the dominated set
    along lattice diagonals stay connected.
    """
    _check_size(oracle.n)
    a = as_outcome(a, oracle.n)
    n = oracle.n
    slack = grid.margin / 2 if slack is None else slack
    ua = evaluate(oracle, a)
    member = np.concatenate([
        np.all(evaluate_many(oracle, pts) <= ua + slack, axis=1)
        for pts in _lattice_chunks(tuple(range(n)), n, grid)
    ]).reshape((grid.resolution,) * n)
    labels, count = ndimage.label(member, structure=ndimage.generate_binary_structure(n, 1))
    nearest = tuple(np.rint(a * (grid.resolution - 1)).astype(int))
    return DominatedSetGrid(
        membership=member,
        component_labels=labels,
        components=int(count),
        slack=slack,
        nearest_is_member=bool(member[nearest]),
        zero_is_member=bool(member[(0,) * n]),
    )


def dominated_set_connected(oracle: UtilityOracle, a, grid: GridSpec = GridSpec(), slack=None):
    d = dominated_set_grid(oracle, a, grid, slack)
    return d.connected, d.components


@dataclass
class CharacterizationResult:
    """Grid check that core membership equals Pareto & IR & connected."""

    core: Optional[bool]
    pareto: Optional[bool]
    individually_rational: Optional[bool]
    connected: Optional[bool]
    components: tuple  # component counts at slack margin/2 and margin

    @property
    def conjunction(self) -> Optional[bool]:
        clauses = (self.pareto, self.individually_rational, self.connected)
        if any(c is False for c in clauses):
            return False
        if all(c is True for c in clauses):
            return True
        return None

    @property
    def holds(self) -> Optional[bool]:
        if self.core is None or self.conjunction is None:
            return None
        return self.core == self.conjunction

    @property
    def status(self) -> str:
        return {True: "PASS", False: "FAIL", None: "SKIPPED"}[self.holds]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "core": self.core,
            "pareto": self.pareto,
            "individually_rational": self.individually_rational,
            "connected": self.connected,
            "conjunction": self.conjunction,
            "components": list(self.components),
        }


def characterization_check(oracle: UtilityOracle, a, grid: GridSpec = GridSpec()) -> CharacterizationResult:
    """Compare the grid core verdict with Pareto, IR and dominated-set connectivity.

    Connectivity is evaluated at slacks ``margin/2`` and ``margin``; if the
    two disagree the clause is undecided.
    """
    bf = brute_force_core_test(oracle, a, grid)
    pir = brute_force_pareto_and_ir(oracle, a, grid)
    tight = dominated_set_grid(oracle, a, grid, grid.margin / 2)
    loose = dominated_set_grid(oracle, a, grid, grid.margin)
    connected = tight.connected if tight.connected == loose.connected else None
    return CharacterizationResult(
        core=bf.decided,
        pareto=pir.pareto_decided,
        individually_rational=pir.ir_decided,
        connected=connected,
        components=(tight.components, loose.components),
    )
