"""Running-cost families and their admissibility audit.

A running cost enters the discounted functional and must satisfy two
properties: a uniform bound, and Lipschitz continuity with respect to the
weak norm.  The Lipschitz property comes in two flavors, controlled by
`lipschitz_mode`:

    unsquared:  |L(x,.) - L(y,.)| <= weak_lipschitz * |x - y|_B
    squared:    |L(x,.) - L(y,.)| <= weak_lipschitz * |x - y|_B^2

The value-function machinery consumes the unsquared form; the squared form
is accepted for costs that only need it near a reference point and is
flagged so downstream bounds can refuse it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CostRejectedError
from .grid import GridFunction
from .operators import WeakNormFactorization

UNSQUARED = "unsquared"
SQUARED = "squared"


@dataclass(frozen=True)
class RunningCost:
    """One running-cost family with its declared regularity constants.

    `state_fn` maps a batch of states (n, M) to costs (n,) and is used when
    `control_independent` is set.  Otherwise `full_fn(states, alpha, a)`
    receives the spatially-constant control values per row.
    """

    label: str
    bound: float
    weak_lipschitz: float
    lipschitz_mode: str = UNSQUARED
    control_affine: bool = True
    control_independent: bool = True
    state_fn: Callable[[np.ndarray], np.ndarray] | None = None
    full_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    # weighted form matrix when L = min(bound, x^T quad_matrix x); lets the
    # value evaluator use the affine trajectory decomposition
    quad_matrix: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.lipschitz_mode not in (UNSQUARED, SQUARED):
            raise ValueError(f"unknown lipschitz mode {self.lipschitz_mode!r}")
        if self.control_independent and self.state_fn is None:
            raise ValueError("control-independent cost needs state_fn")
        if not self.control_independent and self.full_fn is None:
            raise ValueError("control-dependent cost needs full_fn")

    def evaluate_states(self, states: np.ndarray) -> np.ndarray:
        if not self.control_independent:
            raise ValueError(f"cost {self.label!r} depends on the controls")
        return np.asarray(self.state_fn(np.atleast_2d(states)), dtype=float)

    def evaluate(self, states: np.ndarray, alpha: np.ndarray, a: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        if self.control_independent:
            return np.asarray(self.state_fn(states), dtype=float)
        return np.asarray(self.full_fn(states, np.asarray(alpha), np.asarray(a)), dtype=float)

    def at(self, x: GridFunction, alpha: float = 0.0, a: float = 0.0) -> float:
        return float(self.evaluate(x.values[None, :], np.array([alpha]), np.array([a]))[0])


def constant_cost(c: float) -> RunningCost:
    return RunningCost(
        label="constant",
        bound=abs(c),
        weak_lipschitz=0.0,
        state_fn=lambda states: np.full(states.shape[0], float(c)),
    )


def clipped_weak_energy_cost(bf: WeakNormFactorization, clip: float) -> RunningCost:
    """L(x) = min(clip, |x|_B^2).

    The clip keeps the family uniformly bounded; its exact unsquared
    Lipschitz constant in the weak norm is 2 sqrt(clip), since both states
    matter only while at least one energy is below the clip level.
    """
    if clip <= 0:
        raise ValueError("clip level must be positive")
    w = bf.grid.trapezoid_weights
    quad = w[:, None] * bf.matrix.entries

    def state_fn(states: np.ndarray) -> np.ndarray:
        energies = np.einsum("ni,ij,nj->n", states, quad, states)
        return np.minimum(float(clip), np.maximum(energies, 0.0))

    return RunningCost(
        label="clipped-weak-energy",
        bound=float(clip),
        weak_lipschitz=2.0 * float(np.sqrt(clip)),
        state_fn=state_fn,
        quad_matrix=quad,
    )


def boundary_effort_cost(
    bf: WeakNormFactorization, clip: float, effort: float, a_bound: float
) -> RunningCost:
    """Clipped weak energy plus a quadratic charge on the boundary value."""
    base = clipped_weak_energy_cost(bf, clip)

    def full_fn(states: np.ndarray, alpha: np.ndarray, a: np.ndarray) -> np.ndarray:
        return base.state_fn(states) + effort * np.asarray(a, dtype=float) ** 2

    return RunningCost(
        label="boundary-effort",
        bound=float(clip) + abs(effort) * a_bound * a_bound,
        weak_lipschitz=base.weak_lipschitz,
        control_affine=False,
        control_independent=False,
        full_fn=full_fn,
    )


def unclipped_l2_cost(grid_weights: np.ndarray, claimed_bound: float = 1.0) -> RunningCost:
    """Negative control: plain L2 energy with a bogus boundedness claim."""
    w = np.asarray(grid_weights, dtype=float)

    def state_fn(states: np.ndarray) -> np.ndarray:
        return np.einsum("ni,i,ni->n", states, w, states)

    return RunningCost(
        label="unclipped-l2",
        bound=float(claimed_bound),
        weak_lipschitz=1.0,
        state_fn=state_fn,
    )


@dataclass(frozen=True)
class CostAuditReport:
    label: str
    samples: int
    worst_bound_excess: float
    worst_lipschitz_excess: float
    accepted: bool


def validate_cost(
    cost: RunningCost,
    bf: WeakNormFactorization,
    rng: np.random.Generator,
    samples: int = 200,
    scale: float = 4.0,
    rtol: float = 1e-9,
) -> CostAuditReport:
    """Sampled audit of the declared bound and weak-norm Lipschitz property.

    Draws random state pairs (smooth spectral combinations plus rough noise,
    amplified up to `scale`), random in-range control values, and rejects the
    family on the first violated declaration.  A passing audit is evidence,
    not proof; a failing audit is a proof of inadmissibility.
    """
    grid = bf.grid
    m = grid.node_count
    worst_bound = 0.0
    worst_lip = 0.0
    k_modes = min(12, bf.eigenvalues.size)
    for _ in range(samples):
        amp = scale * rng.uniform(0.1, 1.0)
        coef = rng.normal(size=k_modes)
        x = amp * (bf.eigenvectors[:, :k_modes] @ coef)
        if rng.uniform() < 0.3:
            x = x + rng.normal(scale=amp, size=m)
        y = x + rng.normal(scale=amp * rng.uniform(0.01, 1.0), size=m)
        alpha = np.array([rng.uniform(-1.0, 1.0)])
        a = np.array([rng.uniform(-1.0, 1.0)])
        lx = float(cost.evaluate(x[None, :], alpha, a)[0])
        ly = float(cost.evaluate(y[None, :], alpha, a)[0])
        worst_bound = max(worst_bound, abs(lx) - cost.bound, abs(ly) - cost.bound)
        gap = bf.norm_of_values(x - y)
        if cost.lipschitz_mode == SQUARED:
            gap = gap * gap
        worst_lip = max(worst_lip, abs(lx - ly) - cost.weak_lipschitz * gap)
    tol = rtol * max(1.0, cost.bound)
    accepted = worst_bound <= tol and worst_lip <= tol
    report = CostAuditReport(
        label=cost.label,
        samples=samples,
        worst_bound_excess=worst_bound,
        worst_lipschitz_excess=worst_lip,
        accepted=accepted,
    )
    if not accepted:
        name = "uniform bound" if worst_bound > tol else "weak-norm Lipschitz bound"
        raise CostRejectedError(
            f"cost {cost.label!r} violates its declared {name} "
            f"(bound excess {worst_bound:g}, lipschitz excess {worst_lip:g})"
        )
    return report
