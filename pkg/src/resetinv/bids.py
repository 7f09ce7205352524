"""Binary search for the reset-state value (BiDS).

The optimal cost-to-go from the reset state, ``v*``, is the fixed point of
``v -> Upsilon(v)``: run backward induction assuming every reset costs ``v``
plus the discard cost, then read off the optimal value at ``(0, 0)``.
``Upsilon`` is nondecreasing with slope below one, so the sign of
``Upsilon(v) - v`` brackets ``v*`` and bisection converges.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bellman import DEFAULT_KNOTS, Kernel, SweepResult, sweep

log = logging.getLogger(__name__)

DEFAULT_REL_EPS = 1e-6
EPS_FLOOR = 1e-12


class BracketError(RuntimeError):
    """The initial interval does not bracket the fixed point."""


@dataclass
class Solution:
    v_star: float
    epsilon: float
    sweep: SweepResult
    phi: float
    iterations: int
    v_upper0: float
    bracket_history: list = field(default_factory=list)

    @property
    def upsilon(self) -> float:
        return self.sweep.upsilon

    @property
    def residual(self) -> float:
        return abs(self.sweep.upsilon - self.v_star)


def initial_upper_bound(spec, kernel: Kernel | None = None, n: int = DEFAULT_KNOTS) -> float:
    """Discounted cost of the stationary policy "order to z, reset next epoch", minimized over z."""
    if kernel is None:
        kernel = Kernel.build(spec, n)
    z = kernel.grid.knots
    fixed = spec.costs.K * (z > 0)
    per_epoch = spec.costs.c * z + fixed + kernel.H[0] + spec.gamma * (kernel.A @ kernel.R[1])
    return float(per_epoch.min() / (1.0 - spec.gamma))


def solve(spec, epsilon: float | None = None, n: int = DEFAULT_KNOTS, kernel: Kernel | None = None) -> Solution:
    """Locate ``v*`` by bisection and return the policy from a final sweep at ``v*``.

    ``epsilon`` defaults to ``1e-6`` times the initial upper bound.
    """
    if kernel is None:
        kernel = Kernel.build(spec, n)
    v_hi = initial_upper_bound(spec, kernel)
    v_lo = 0.0
    if epsilon is None:
        epsilon = max(DEFAULT_REL_EPS * v_hi, EPS_FLOOR)
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")

    slack = 1e-9 * (1.0 + v_hi)
    top = sweep(spec, v_hi, kernel)
    if top.upsilon > v_hi + slack:
        raise BracketError(f"Upsilon(v_hi)={top.upsilon} exceeds v_hi={v_hi}")
    bottom = sweep(spec, v_lo, kernel)
    if bottom.upsilon < v_lo - slack:
        raise BracketError(f"Upsilon(0)={bottom.upsilon} is negative")

    history = [(v_lo, v_hi)]
    iterations = 0
    while v_hi - v_lo > epsilon:
        v = 0.5 * (v_lo + v_hi)
        upsilon = sweep(spec, v, kernel).upsilon
        iterations += 1
        if abs(upsilon - v) <= 0.5 * epsilon:
            v_lo = v_hi = v
            history.append((v_lo, v_hi))
            break
        if upsilon < v:
            v_hi = v
        else:
            v_lo = v
        history.append((v_lo, v_hi))
    v_star = 0.5 * (v_lo + v_hi)
    final = sweep(spec, v_star, kernel)
    log.debug("bids: v*=%.10g after %d iterations, residual %.3g", v_star, iterations, abs(final.upsilon - v_star))
    return Solution(v_star, epsilon, final, final.phi, iterations, history[0][1], history)


def max_iterations(v_upper0: float, epsilon: float) -> int:
    if v_upper0 <= epsilon:
        return 0
    return math.ceil(math.log2(v_upper0 / epsilon)) + 1


def upsilon_ladder(spec, values, kernel: Kernel | None = None, n: int = DEFAULT_KNOTS) -> np.ndarray:
    """Evaluate ``Upsilon`` on a list of candidate reset values."""
    if kernel is None:
        kernel = Kernel.build(spec, n)
    return np.array([sweep(spec, float(v), kernel).upsilon for v in values])
