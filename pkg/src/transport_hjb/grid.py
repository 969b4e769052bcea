"""Uniform-grid functions on [0, sbar]: quadrature, norms, difference quotients.

A :class:`GridFunction` is the discrete stand-in for an element of
L2(0, sbar).  All integrals are composite trapezoid, which is exact for
piecewise-linear data, so a grid function is best thought of as the
piecewise-linear interpolant of its node values.

Shift arguments must be integer multiples of the spacing.  That keeps
translation exact (a node-to-node copy) and is enforced, not rounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AlignmentError, DomainError, GridMismatchError

# Relative slack when snapping a real shift/time to the grid.
_ALIGN_RTOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with `node_count` nodes covering [0, sbar]."""

    node_count: int
    sbar: float

    def __post_init__(self) -> None:
        if self.node_count < 3:
            raise ValueError(f"node_count must be >= 3, got {self.node_count}")
        if not (self.sbar > 0.0) or not np.isfinite(self.sbar):
            raise ValueError(f"sbar must be positive and finite, got {self.sbar}")

    @property
    def dr(self) -> float:
        return self.sbar / (self.node_count - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.sbar, self.node_count)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.node_count, self.dr)
        w[0] *= 0.5
        w[-1] *= 0.5
        w.flags.writeable = False
        return w

    def steps_of(self, s: float, what: str = "shift") -> int:
        """Number of grid steps in `s`, which must be a nonnegative multiple of dr."""
        if s < 0:
            raise AlignmentError(f"{what} must be nonnegative, got {s}")
        k = int(round(s / self.dr))
        if abs(s - k * self.dr) > _ALIGN_RTOL * max(self.dr, abs(s)):
            raise AlignmentError(
                f"{what} {s!r} is not an integer multiple of dr = {self.dr!r}"
            )
        return k


@dataclass(frozen=True)
class GridFunction:
    """Real values on the nodes of a GridSpec.  Immutable after construction."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.spec.node_count,):
            raise GridMismatchError(
                f"expected {self.spec.node_count} values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, spec: GridSpec, fn) -> "GridFunction":
        return cls(spec, np.array([fn(r) for r in spec.nodes], dtype=float))

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "GridFunction":
        return cls(spec, np.full(spec.node_count, float(c)))

    @classmethod
    def zero(cls, spec: GridSpec) -> "GridFunction":
        return cls.constant(spec, 0.0)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _require_same_spec(self, other)
        return GridFunction(self.spec, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _require_same_spec(self, other)
        return GridFunction(self.spec, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.spec, self.values * float(scalar))

    __rmul__ = __mul__


def _require_same_spec(f: GridFunction, g: GridFunction) -> None:
    if f.spec != g.spec:
        raise GridMismatchError(f"grid mismatch: {f.spec} vs {g.spec}")


def inner_product(f: GridFunction, g: GridFunction) -> float:
    """Trapezoid value of the L2 pairing of f and g."""
    _require_same_spec(f, g)
    return float(np.dot(f.spec.trapezoid_weights, f.values * g.values))


def l2_norm(f: GridFunction) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def sup_norm(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values)))


def h1_seminorm(f: GridFunction) -> float:
    """L2 norm of the forward-difference derivative.

    The final node has no forward neighbour and reuses the preceding
    difference, so constants still give exactly zero.
    """
    d = np.diff(f.values) / f.spec.dr
    d_full = np.append(d, d[-1])
    g = GridFunction(f.spec, d_full)
    return l2_norm(g)


def default_domain_tol(f: GridFunction) -> float:
    return 1e-8 * max(sup_norm(f), 1e-30)


def in_domain_a(f: GridFunction, tol: float | None = None) -> bool:
    """Proxy for membership in {f in H1 : f(0) = 0}."""
    if tol is None:
        tol = default_domain_tol(f)
    if tol <= 0:
        raise ValueError("tol must be positive")
    return abs(float(f.values[0])) <= tol


def in_domain_astar(f: GridFunction, tol: float | None = None) -> bool:
    """Proxy for membership in {f in H1 : f(sbar) = 0}."""
    if tol is None:
        tol = default_domain_tol(f)
    if tol <= 0:
        raise ValueError("tol must be positive")
    return abs(float(f.values[-1])) <= tol


def require_domain_astar(f: GridFunction, tol: float | None = None, who: str = "input") -> None:
    if not in_domain_astar(f, tol):
        raise DomainError(
            f"{who} must vanish at the outflow end r = sbar "
            f"(got {float(f.values[-1])!r})"
        )


def require_domain_a(f: GridFunction, tol: float | None = None, who: str = "input") -> None:
    if not in_domain_a(f, tol):
        raise DomainError(
            f"{who} must vanish at the inflow end r = 0 (got {float(f.values[0])!r})"
        )


def dq_energy(x: GridFunction, s: float) -> float:
    """Integral over [s, sbar] of (x[r] - x[r-s])^2 / s, trapezoid rule.

    Vanishes as s -> 0 for H1 data; the grid check only certifies that
    for smooth representatives.
    """
    spec = x.spec
    k = spec.steps_of(s)
    if k == 0 or k >= spec.node_count - 1:
        raise AlignmentError(f"need 0 < s < sbar along the grid, got s = {s}")
    diff = x.values[k:] - x.values[:-k]
    integrand = diff * diff / s
    w = np.full(integrand.size, spec.dr)
    w[0] *= 0.5  # edges of the trimmed interval [s, sbar], not of [0, sbar]
    w[-1] *= 0.5
    return float(np.dot(w, integrand))


def dq_pairing(x: GridFunction, s: float) -> float:
    """Integral over [s, sbar - s] of (x[r+s] - x[r]) / s * x[r].

    Tends to (x[sbar]^2 - x[0]^2) / 2 as s -> 0 for H1 data.
    """
    spec = x.spec
    k = spec.steps_of(s)
    m = spec.node_count
    if k == 0 or 2 * k >= m - 1:
        raise AlignmentError(f"need 0 < 2s < sbar along the grid, got s = {s}")
    lo, hi = k, m - 1 - k  # inclusive node range of [s, sbar - s]
    diff = (x.values[lo + k : hi + k + 1] - x.values[lo : hi + 1]) / s
    integrand = diff * x.values[lo : hi + 1]
    w = np.full(integrand.size, spec.dr)
    w[0] *= 0.5
    w[-1] *= 0.5
    return float(np.dot(w, integrand))
