from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

EXACT = "exact"
APPROX = "approx"


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and budgets shared by the solver and the core tests.

    ``tau_dev`` is the margin above which a computed value counts as
    strictly positive; it must be at least ten times ``epsilon``.
    """

    epsilon: float = 1e-6
    tau_dev: float = 1e-5
    max_iterations: int = 50_000
    seed: int = 0
    mode: str = EXACT
    eps_core: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.tau_dev > 0:
            raise ValueError("tau_dev must be positive")
        if self.tau_dev < 10 * self.epsilon:
            raise ValueError("tau_dev must be at least 10x epsilon")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.mode not in (EXACT, APPROX):
            raise ValueError(f"mode must be {EXACT!r} or {APPROX!r}")
        if self.mode == APPROX:
            if self.eps_core is None or not self.eps_core > 0:
                raise ValueError("approx mode requires eps_core > 0")
            if self.kappa is None or not self.kappa > 0:
                raise ValueError("approx mode requires kappa > 0")

    def to_dict(self) -> dict:
        return asdict(self)
