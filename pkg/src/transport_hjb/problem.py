"""Scalar problem data: wave speed, decay rate, discount, resolvent shift.

The time step is tied to the grid by dt = dr / beta (unit CFL), which makes
one transport step an exact one-node shift.  Everything downstream leans on
that exactness, so dt is derived, never chosen independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError
from .grid import GridSpec

_ALIGN_RTOL = 1e-9


@dataclass(frozen=True)
class ProblemSpec:
    beta: float
    mu: float
    sbar: float
    rho: float
    lambda_b: float
    grid: GridSpec

    def __post_init__(self) -> None:
        if not (self.beta > 0.0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (self.rho > 0.0):
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not (0.0 < self.lambda_b < 1.0):
            raise ValueError(
                f"lambda_b must lie in (0, 1) so the weak-norm domination "
                f"inequality holds, got {self.lambda_b}"
            )
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if abs(self.grid.sbar - self.sbar) > 1e-12 * max(1.0, self.sbar):
            raise ValueError(
                f"grid covers [0, {self.grid.sbar}] but sbar = {self.sbar}"
            )

    @classmethod
    def make(
        cls,
        beta: float = 1.0,
        mu: float = 0.0,
        sbar: float = 1.0,
        rho: float = 1.0,
        lambda_b: float = 0.5,
        node_count: int = 201,
    ) -> "ProblemSpec":
        return cls(beta, mu, sbar, rho, lambda_b, GridSpec(node_count, sbar))

    @property
    def dt(self) -> float:
        return self.grid.dr / self.beta

    def time_steps_of(self, s: float, what: str = "time") -> int:
        """Number of dt steps in s; s must be a nonnegative multiple of dt."""
        if s < 0:
            raise AlignmentError(f"{what} must be nonnegative, got {s}")
        k = int(round(s / self.dt))
        if abs(s - k * self.dt) > _ALIGN_RTOL * max(self.dt, abs(s)):
            raise AlignmentError(
                f"{what} {s!r} is not an integer multiple of dt = {self.dt!r}"
            )
        return k
