"""Problem instances for inventory control with controlled resets.

A reset empties the stock and sends the system back to ``(x, t) = (0, 0)``;
the epoch counter ``t`` forces a reset once it reaches the deadline ``k``.
Two concrete models are provided: water storage (consumption-based health
penalty, per-unit flush cost) and retail with changing product lines (holding
cost, fixed order cost, fixed switching cost).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .demand import DemandModel

KINDS = ("water", "retail")


class NotStronglyConvexError(ValueError):
    """Raised when some expected stage cost H(., t) has no positive curvature bound."""


@dataclass(frozen=True)
class CostParameters:
    c: float = 0.0  # per-unit order cost
    K: float = 0.0  # fixed order cost
    reset_unit: float = 0.0  # per-unit discard cost
    reset_fixed: float = 0.0
    p: float = 0.0  # shortage penalty
    q: tuple = (0.0,)  # holding/health penalty per epoch since reset

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in np.atleast_1d(self.q)))
        for name in ("c", "K", "reset_unit", "reset_fixed", "p"):
            if getattr(self, name) < 0:
                raise ValueError(f"cost parameter {name} must be >= 0")
        if min(self.q) < 0:
            raise ValueError("cost parameter q must be >= 0")

    def scaled(self, factor: float) -> "CostParameters":
        return CostParameters(
            c=self.c * factor,
            K=self.K * factor,
            reset_unit=self.reset_unit * factor,
            reset_fixed=self.reset_fixed * factor,
            p=self.p * factor,
            q=tuple(v * factor for v in self.q),
        )


class State(NamedTuple):
    x: float
    t: int


@dataclass(frozen=True)
class ProblemSpec:
    """A complete instance. ``q`` is broadcast to one value per epoch ``t = 0..k-1``."""

    kind: str
    costs: CostParameters
    demand: DemandModel
    c_max: float
    k: int
    gamma: float
    zeta: float = field(default=0.0, init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not self.c_max > 0:
            raise ValueError("c_max must be > 0")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        q = self.costs.q
        if len(q) == 1:
            q = q * self.k
        if len(q) != self.k:
            raise ValueError(f"q must be a scalar or have length k={self.k}")
        if self.kind == "water":
            if self.costs.K != 0:
                raise ValueError("water model has no fixed order cost")
            if self.costs.reset_fixed != 0:
                raise ValueError("water model has no fixed reset cost")
            if any(b < a for a, b in zip(q, q[1:])):
                raise ValueError("water health penalty q(t) must be nondecreasing in t")
        object.__setattr__(self, "costs", replace(self.costs, q=q))

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.costs.q)

    @property
    def structure_guaranteed(self) -> bool:
        """False for water instances with ``p <= q(t)`` at some t."""
        if self.kind == "water":
            return bool(np.all(self.costs.p - self.q > 0))
        return True

    def with_gamma(self, gamma: float) -> "ProblemSpec":
        return replace(self, gamma=gamma)

    def scaled(self, factor: float) -> "ProblemSpec":
        return replace(self, costs=self.costs.scaled(factor))


def transition(spec: ProblemSpec, s: State, r: int, u: float, w: float) -> State:
    """Apply one epoch of dynamics: optional reset, order ``u``, demand ``w``."""
    xi = s.x * (1 - r)
    if u < 0 or xi + u > spec.c_max * (1 + 1e-12):
        raise ValueError(f"order u={u} outside [0, {spec.c_max - xi}] at pseudo-stock {xi}")
    if w < 0:
        raise ValueError("demand must be nonnegative")
    x_next = max(xi + u - w, 0.0)
    assert x_next <= spec.c_max * (1 + 1e-12)
    return State(min(x_next, spec.c_max), s.t * (1 - r) + 1)


def expected_stage_cost(spec: ProblemSpec, z, t: int):
    """H(z, t): expected shortage plus holding/health cost at post-order level ``z``."""
    d = spec.demand
    if spec.kind == "water":
        qt = spec.q[t]
        return (spec.costs.p - qt) * d.loss(z) + qt * d.mean
    q = spec.q[t]
    # int_0^z (z - w) f dw = z - E[w] + loss(z)
    return (spec.costs.p + q) * d.loss(z) + q * (np.asarray(z) - d.mean)


def expected_reset_cost(spec: ProblemSpec, x, t: int):
    """R(x, t), the cost of discarding stock ``x``."""
    out = spec.costs.reset_unit * np.asarray(x, dtype=float)
    if spec.kind == "retail":
        out = out + spec.costs.reset_fixed
    return out if np.ndim(out) else float(out)


def realized_stage_cost(spec: ProblemSpec, u, z, w, t):
    """Stage cost for a realized demand ``w`` (excluding the reset cost).

    ``u`` is the order, ``z`` the post-order level and ``t`` the pseudo-epoch.
    Arrays broadcast.
    """
    u, z, w = np.asarray(u), np.asarray(z), np.asarray(w)
    qt = spec.q[np.asarray(t)]
    short = np.maximum(w - z, 0.0)
    cost = spec.costs.c * u + spec.costs.p * short
    if spec.kind == "water":
        consumed = z - np.maximum(z - w, 0.0)
        return cost + qt * consumed
    return cost + spec.costs.K * (u > 0) + qt * np.maximum(z - w, 0.0)


@dataclass(frozen=True)
class StructureConstants:
    m: np.ndarray  # curvature lower bound of c z + H(z, t), t = 0..k-1
    kappa: np.ndarray  # |dH/dz| bound, t = 0..k-1
    eta: np.ndarray  # |dR/dx| bound, t = 0..k
    L_reset: np.ndarray  # Lipschitz constant of dR/dx, t = 0..k
    P: float
    L: float
    min_density: float


def structure_constants(spec: ProblemSpec, mesh: int = 2001, strict: bool = True) -> StructureConstants:
    """Smoothness and convexity constants of the instance.

    Raises :class:`NotStronglyConvexError` when some ``m_t <= 0`` unless
    ``strict`` is false.
    """
    d = spec.demand
    fmin = d.min_density(0.0, spec.c_max, mesh)
    P, L = d.density_bounds()
    p, q = spec.costs.p, spec.q
    if spec.kind == "water":
        curv = p - q
        kappa = p - q
    else:
        curv = np.full(spec.k, p) + q
        # dH/dz = (p + q) F(z) - p ranges over [-p, q]
        kappa = np.maximum(p, q)
    m = curv * fmin
    eta = np.full(spec.k + 1, spec.costs.reset_unit)
    consts = StructureConstants(
        m=m,
        kappa=np.asarray(kappa, dtype=float),
        eta=eta,
        L_reset=np.zeros(spec.k + 1),
        P=P,
        L=L,
        min_density=fmin,
    )
    if strict and np.any(m <= 0):
        bad = [int(t) for t in np.flatnonzero(m <= 0)]
        raise NotStronglyConvexError(f"m_t <= 0 at t={bad}")
    return consts
