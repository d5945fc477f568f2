"""Numerical knobs shared by the flows and the property testers."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional


@dataclass(frozen=True)
class TestConfig:
    """How a ``limsup -> 0`` claim is realized on finite data.

    A curve ``d_n`` counts as converged when its maximum over the last
    ``tail_window`` values up to the horizon is below ``tol``. Uniform levels
    use the fixed horizon ``n_max``; the pointwise level lets each
    (window, pair) run to ``pointwise_horizon``.
    """

    __test__ = False  # not a pytest class

    n_max: int = 200
    tail_window: int = 20
    tol: float = 1e-6
    state_samples: int = 64
    input_samples: int = 32
    burn_in: int = 128
    seed: int = 0
    n_cap: Optional[int] = None
    fmp_perturbations: int = 4
    lemma_pasts: int = 8

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be positive")
        if not 1 <= self.tail_window <= self.n_max:
            raise ValueError("tail_window must lie in [1, n_max]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.burn_in < 1:
            raise ValueError("burn_in must be at least 1")
        if self.state_samples < 1 or self.input_samples < 1:
            raise ValueError("sample counts must be positive")
        if self.n_cap is not None and self.n_cap < self.n_max:
            raise ValueError("n_cap must be at least n_max")

    def pointwise_horizon(self, slow_horizon: int = 0) -> int:
        base = self.n_cap if self.n_cap is not None else 4 * self.n_max
        return max(base, int(slow_horizon))

    def tail(self, horizon: Optional[int] = None) -> list[int]:
        horizon = self.n_max if horizon is None else horizon
        return list(range(horizon - self.tail_window + 1, horizon + 1))

    def as_dict(self) -> dict:
        return asdict(self)
