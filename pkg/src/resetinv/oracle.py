"""Independent checks of the BiDS solution.

``value_iteration`` solves the same discretized problem by plain fixed-point
iteration, with its expectations computed by trapezoid quadrature of the raw
density rather than the closed forms the solver uses. ``rollout`` estimates
the discounted cost of any policy by Monte Carlo on the continuous state.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bellman import DEFAULT_KNOTS, Grid, no_reset_choice, reset_decision
from .model import ProblemSpec, expected_reset_cost, realized_stage_cost

THREADS_ENV = "RESETINV_THREADS"


class ConvergenceError(RuntimeError):
    pass


class PolicyError(RuntimeError):
    """A rollout reached a state where the policy has no action."""


# ----------------------------------------------------------------------
# quadrature operator


def _interp_weights(pos: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = np.clip(np.floor(pos).astype(int), 0, n - 2)
    frac = pos - lo
    return lo, 1.0 - frac, frac


def quadrature_operator(spec: ProblemSpec, grid: Grid, sub: int = 10, tail_mesh: int = 2001):
    """Continuation matrix and stage-cost table by composite trapezoid quadrature.

    Every continuation integral uses a mesh ``sub`` times finer than the grid,
    so interpolation kinks fall on mesh nodes.
    """
    d, n, h = spec.demand, grid.n, grid.step
    x = grid.knots
    B = np.zeros((n, n))
    dw = h / sub
    for i in range(1, n):
        w = dw * np.arange(i * sub + 1)
        fw = d.density(w)
        tw = np.full(w.size, dw)
        tw[0] = tw[-1] = 0.5 * dw
        wt = tw * fw
        lo, a, b = _interp_weights((x[i] - w) / h, n)
        np.add.at(B[i], lo, wt * a)
        np.add.at(B[i], lo + 1, wt * b)
        B[i, 0] += 1.0 - wt.sum()
    B[0, 0] = 1.0

    w_hi = max(d.upper_support(1e-12), spec.c_max)
    w = np.linspace(0.0, w_hi, 20 * tail_mesh + 1)
    fw = d.density(w)
    mean = np.trapezoid(w * fw, w)
    shortfall = np.empty(n)  # int_z^inf (w - z) f
    overage = np.empty(n)  # int_0^z (z - w) f
    for i, z in enumerate(x):
        up = np.linspace(z, w_hi, tail_mesh)
        shortfall[i] = np.trapezoid((up - z) * d.density(up), up) if z < w_hi else 0.0
        down = np.linspace(0.0, z, tail_mesh)
        overage[i] = np.trapezoid((z - down) * d.density(down), down) if z > 0 else 0.0
    p = spec.costs.p
    H = np.empty((spec.k, n))
    for t in range(spec.k):
        q = spec.q[t]
        if spec.kind == "water":
            H[t] = (p - q) * shortfall + q * mean
        else:
            H[t] = p * shortfall + q * overage
    return B, H


@dataclass
class ValueIterationResult:
    V: np.ndarray  # (k+1, n)
    J0: float
    iterations: int
    residual: float
    reset_action: np.ndarray
    order_target: np.ndarray
    grid: Grid
    phi: float


def value_iteration(spec: ProblemSpec, tol: float = 1e-9, max_iters: int = 100_000,
                    n: int = DEFAULT_KNOTS, operator=None) -> ValueIterationResult:
    """Jacobi value iteration on the ``(knot, t)`` table.

    Each iterate is a function of the previous one only: the reset-state
    value is the no-reset optimum at ``(0, 0)`` computed from the previous
    table, and the reset branch of every state uses that value.
    """
    grid = Grid(spec.c_max, n)
    x = grid.knots
    B, H = operator if operator is not None else quadrature_operator(spec, grid)
    R = np.array([np.broadcast_to(expected_reset_cost(spec, x, t), x.shape) for t in range(spec.k + 1)])
    c, K, k, gamma = spec.costs.c, spec.costs.K, spec.k, spec.gamma
    V = np.zeros((k + 1, n))
    J0 = 0.0
    reset = np.ones((k + 1, n), dtype=bool)
    target = np.tile(x, (k + 1, 1))
    phi = 0.0
    residual = math.inf
    for it in range(1, max_iters + 1):
        V_new = np.empty_like(V)
        rows = []
        for t in range(k):
            G = c * x + H[t] + gamma * (B @ V[t + 1])
            rows.append(no_reset_choice(G, K))
        # reset-state value of this iterate, read off (0, 0) without a reset branch
        J0_new = float(rows[0][0][0])
        phi = float(x[rows[0][1][0]])
        V_new[k] = J0_new + R[k]
        for t, (best, arg) in enumerate(rows):
            J_N = best - c * x
            J_R = J0_new + R[t]
            reset[t] = reset_decision(J_R, J_N, t)
            V_new[t] = np.where(reset[t], J_R, J_N)
            target[t] = x[arg]
        residual = max(float(np.max(np.abs(V_new - V))), abs(J0_new - J0))
        V, J0 = V_new, J0_new
        if residual <= tol:
            return ValueIterationResult(V, J0, it, residual, reset, target, grid, phi)
    raise ConvergenceError(f"value iteration did not converge in {max_iters} iterations (residual {residual:.3g})")


# ----------------------------------------------------------------------
# Monte Carlo rollout


@dataclass
class TabulatedPolicy:
    """Policy read from knot tables; off-knot states use the nearest knot."""

    grid: Grid
    reset_action: np.ndarray
    order_target: np.ndarray
    phi: float

    @classmethod
    def from_solution(cls, solution):
        sw = solution.sweep
        return cls(sw.grid, sw.reset_action, sw.order_target, solution.phi)

    @classmethod
    def from_value_iteration(cls, vi: ValueIterationResult):
        return cls(vi.grid, vi.reset_action, vi.order_target, vi.phi)

    def decide(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t)
        if np.any(x < -1e-9) or np.any(x > self.grid.c_max * (1 + 1e-9)):
            raise PolicyError(f"stock outside the tabulated range at x={x.max()}")
        i = np.clip(np.rint(x / self.grid.step).astype(int), 0, self.grid.n - 1)
        reset = self.reset_action[t, i]
        z = np.where(reset, self.phi, np.maximum(self.order_target[t, i], x))
        return reset, z


@dataclass
class RolloutReport:
    mean_discounted_cost: float
    stderr: float
    n_paths: int
    horizon: int
    seed: int
    tail_bound: float
    max_epochs_between_resets: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def default_horizon(gamma: float, rel_tail: float = 1e-4) -> int:
    """Smallest T with ``gamma**T <= rel_tail``."""
    if gamma == 0.0:
        return 1
    return max(1, math.ceil(math.log(rel_tail) / math.log(gamma)))


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _simulate(spec, policy, x0, t0, demands):
    paths, horizon = demands.shape
    x = np.full(paths, float(x0))
    t = np.full(paths, int(t0))
    total = np.zeros(paths)
    longest = int(t0)
    disc = 1.0
    for step in range(horizon):
        if np.any(t > spec.k):
            raise PolicyError(f"epoch counter exceeded k={spec.k}")
        forced = t >= spec.k
        reset = np.ones(paths, dtype=bool)
        z = np.full(paths, policy.phi)
        free = ~forced
        if free.any():
            reset[free], z[free] = policy.decide(x[free], t[free])
        cost = np.where(reset, expected_reset_cost(spec, x, 0), 0.0)
        xi = np.where(reset, 0.0, x)
        tau = np.where(reset, 0, t)
        if np.any(z < xi - 1e-12) or np.any(z > spec.c_max * (1 + 1e-12)):
            raise PolicyError("policy ordered outside the capacity window")
        w = demands[:, step]
        cost = cost + realized_stage_cost(spec, z - xi, z, w, tau)
        total += disc * cost
        disc *= spec.gamma
        x = np.maximum(z - w, 0.0)
        t = tau + 1
        longest = max(longest, int(t.max()))
    return total, longest


def rollout(spec: ProblemSpec, policy, x0: float = 0.0, t0: int = 0, horizon: int | None = None,
            n_paths: int = 20_000, seed: int = 0, v_upper: float | None = None) -> RolloutReport:
    """Monte Carlo estimate of the discounted cost of ``policy`` from ``(x0, t0)``.

    Each path draws its demands from its own substream of ``seed``, so results
    do not depend on how paths are split across threads.
    """
    if horizon is None:
        horizon = default_horizon(spec.gamma)
    children = np.random.SeedSequence(seed).spawn(n_paths)
    demands = np.empty((n_paths, horizon))
    for i, child in enumerate(children):
        demands[i] = spec.demand.sample(np.random.default_rng(child), horizon)

    workers = _thread_count()
    chunks = np.array_split(np.arange(n_paths), workers)
    if workers == 1:
        parts = [_simulate(spec, policy, x0, t0, demands)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda idx: _simulate(spec, policy, x0, t0, demands[idx]), chunks))
    totals = np.concatenate([p[0] for p in parts])
    longest = max(p[1] for p in parts)
    stderr = float(totals.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    tail = spec.gamma**horizon * (v_upper if v_upper is not None else 0.0)
    return RolloutReport(float(totals.mean()), stderr, n_paths, horizon, seed, tail, longest)
