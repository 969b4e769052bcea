"""Control boxes and piecewise-constant control paths.

The boundary control a(t) takes values in the interval [gamma_lo, gamma_hi]
and the distributed control alpha(t, .) takes node values in
[lambda_lo, lambda_hi].  Both are held constant over each dt step; step k
owns the half-open window [k dt, (k+1) dt), and an evaluation exactly at the
final time reuses the last step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HorizonError
from .grid import GridSpec

_IDX_EPS = 1e-9


@dataclass(frozen=True)
class ControlBounds:
    """Compact control boxes: Gamma for the boundary, Lambda for node values."""

    gamma_lo: float
    gamma_hi: float
    lambda_lo: float
    lambda_hi: float

    def __post_init__(self) -> None:
        if self.gamma_lo > self.gamma_hi:
            raise ValueError("gamma_lo must be <= gamma_hi")
        if self.lambda_lo > self.lambda_hi:
            raise ValueError("lambda_lo must be <= lambda_hi")
        for v in (self.gamma_lo, self.gamma_hi, self.lambda_lo, self.lambda_hi):
            if not np.isfinite(v):
                raise ValueError("control bounds must be finite")

    @property
    def gamma_norm(self) -> float:
        """Largest boundary-control magnitude."""
        return max(abs(self.gamma_lo), abs(self.gamma_hi))

    @property
    def lambda_norm(self) -> float:
        """Largest node value of a distributed control."""
        return max(abs(self.lambda_lo), abs(self.lambda_hi))

    def sigma_norm(self, sbar: float) -> float:
        """Largest L2 norm over the control box: constant at the extreme value."""
        return self.lambda_norm * float(np.sqrt(sbar))

    def gamma_lattice(self, n: int) -> np.ndarray:
        return _lattice(self.gamma_lo, self.gamma_hi, n)

    def lambda_lattice(self, n: int) -> np.ndarray:
        return _lattice(self.lambda_lo, self.lambda_hi, n)


def _lattice(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("lattice size must be >= 1")
    if n == 1 or lo == hi:
        # single point: the midpoint keeps degenerate boxes honest
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant controls on K consecutive dt steps.

    boundary: shape (K,), one boundary value per step.
    distributed: shape (K, M), one grid function of node values per step.
    """

    grid: GridSpec
    boundary: np.ndarray
    distributed: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.boundary, dtype=float)
        al = np.asarray(self.distributed, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("boundary must be a nonempty 1-d array")
        if al.shape != (a.size, self.grid.node_count):
            raise ValueError(
                f"distributed must have shape ({a.size}, {self.grid.node_count}), "
                f"got {al.shape}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(al))):
            raise ValueError("control values must be finite")
        a = a.copy()
        al = al.copy()
        a.flags.writeable = False
        al.flags.writeable = False
        object.__setattr__(self, "boundary", a)
        object.__setattr__(self, "distributed", al)

    @property
    def steps(self) -> int:
        return int(self.boundary.size)

    @classmethod
    def constant(
        cls, grid: GridSpec, steps: int, a: float = 0.0, alpha: float = 0.0
    ) -> "ControlPath":
        return cls(
            grid,
            np.full(steps, float(a)),
            np.full((steps, grid.node_count), float(alpha)),
        )

    @classmethod
    def zero(cls, grid: GridSpec, steps: int) -> "ControlPath":
        return cls.constant(grid, steps, 0.0, 0.0)

    @classmethod
    def from_step_values(
        cls, grid: GridSpec, boundary_values, alpha_values
    ) -> "ControlPath":
        """Spatially constant distributed control: one alpha scalar per step."""
        a = np.asarray(boundary_values, dtype=float)
        al = np.asarray(alpha_values, dtype=float)
        if al.shape != a.shape:
            raise ValueError("boundary and alpha step lists must have equal length")
        return cls(grid, a, np.repeat(al[:, None], grid.node_count, axis=1))

    def step_index(self, t: float, dt: float) -> int:
        """Index of the step owning time t (right-continuous convention)."""
        if t < -_IDX_EPS * dt:
            raise HorizonError(f"time must be nonnegative, got {t}")
        k = int(np.floor(t / dt + _IDX_EPS))
        if k >= self.steps:
            if k == self.steps and abs(t - self.steps * dt) <= _IDX_EPS * dt * self.steps:
                return self.steps - 1  # exactly the final time
            raise HorizonError(
                f"path has {self.steps} steps (covers [0, {self.steps * dt}]), "
                f"asked for t = {t}"
            )
        return k

    def require_covers(self, steps_needed: int) -> None:
        if steps_needed > self.steps:
            raise HorizonError(
                f"path has {self.steps} steps, but {steps_needed} are needed"
            )

    def validate_bounds(self, bounds: ControlBounds, atol: float = 1e-12) -> None:
        if (
            np.any(self.boundary < bounds.gamma_lo - atol)
            or np.any(self.boundary > bounds.gamma_hi + atol)
        ):
            raise ValueError("boundary control leaves its box")
        if (
            np.any(self.distributed < bounds.lambda_lo - atol)
            or np.any(self.distributed > bounds.lambda_hi + atol)
        ):
            raise ValueError("distributed control leaves its box")
