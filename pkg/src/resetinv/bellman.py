"""Backward-induction kernel on a uniform inventory grid.

Value functions are stored at grid knots and linearly interpolated in
between. The continuation expectation ``E[J((z - w)^+)]`` of such a
piecewise-linear ``J`` is integrated exactly cell by cell from the demand
CDF and partial first moment; a composite-trapezoid route is kept for
cross-checking and for off-knot evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import DemandModel
from .model import ProblemSpec, expected_reset_cost, expected_stage_cost

DEFAULT_KNOTS = 201
DEFAULT_MESH = 2001
RESET_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    c_max: float
    n: int = DEFAULT_KNOTS

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least 2 knots")
        if not self.c_max > 0:
            raise ValueError("grid needs c_max > 0")

    @property
    def step(self) -> float:
        return self.c_max / (self.n - 1)

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(0.0, self.c_max, self.n)


@dataclass(frozen=True)
class TabulatedFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be finite")
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * self.grid.c_max
        if np.any(x < -tol) or np.any(x > self.grid.c_max + tol):
            raise ValueError("evaluation outside [0, c_max]")
        out = np.interp(x, self.grid.knots, self.values)
        return out if out.ndim else float(out)

    def max_abs_slope(self) -> float:
        return float(np.max(np.abs(np.diff(self.values))) / self.grid.step)


def _linear_piece_integrals(d: DemandModel, a, b, ja, jb):
    """Exact ``int_a^b J(w) f(w) dw`` where J is linear from ``ja`` at a to ``jb`` at b."""
    dF = d.cdf(b) - d.cdf(a)
    dM = d.partial_mean(b) - d.partial_mean(a)
    width = b - a
    slope = np.divide(jb - ja, width, out=np.zeros_like(width), where=width > 0)
    return ja * dF + slope * (dM - a * dF)


def expected_continuation(
    J_next: TabulatedFunction,
    d: DemandModel,
    z: float,
    method: str = "exact",
    mesh: int = DEFAULT_MESH,
) -> float:
    """``E[J_next((z - w)^+)]`` for a demand ``w`` drawn from ``d``.

    ``method="exact"`` integrates the piecewise-linear interpolant exactly;
    ``method="trapezoid"`` uses a composite trapezoid rule on ``mesh`` points
    over ``[0, z]`` refined with the interpolation kinks.
    """
    grid = J_next.grid
    if z < 0 or z > grid.c_max * (1 + 1e-12):
        raise ValueError("z outside [0, c_max]")
    z = min(float(z), grid.c_max)
    tail = J_next(0.0) * d.sf(z)
    if z == 0.0:
        return float(tail)
    kinks = z - grid.knots[grid.knots < z]
    if method == "exact":
        w = np.unique(np.concatenate(([0.0, z], kinks[(kinks > 0) & (kinks < z)])))
        jw = J_next(z - w)
        body = _linear_piece_integrals(d, w[:-1], w[1:], jw[:-1], jw[1:]).sum()
    elif method == "trapezoid":
        w = np.unique(np.concatenate((np.linspace(0.0, z, mesh), kinks)))
        body = np.trapezoid(J_next(z - w) * d.density(w), w)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(body + tail)


def continuation_matrix(grid: Grid, d: DemandModel) -> np.ndarray:
    """Matrix ``A`` with ``(A @ J)[i] = E[J((x_i - w)^+)]`` exactly for piecewise-linear J."""
    n, h = grid.n, grid.step
    edges = h * np.arange(n)
    a, b = edges[:-1], edges[1:]
    cell_mass = d.cdf(b) - d.cdf(a)
    # weight that cell m puts on its far end x_{i-m-1}
    far = (d.partial_mean(b) - d.partial_mean(a) - a * cell_mass) / h
    near = cell_mass - far
    A = np.zeros((n, n))
    for i in range(1, n):
        m = np.arange(i)
        A[i, i - m] += near[:i]
        A[i, i - m - 1] += far[:i]
    A[:, 0] += d.sf(grid.knots)
    return A


@dataclass
class Kernel:
    """Everything a sweep needs that does not depend on the reset value ``v``."""

    spec: ProblemSpec
    grid: Grid
    A: np.ndarray
    H: np.ndarray  # (k, n)
    R: np.ndarray  # (k+1, n)

    @classmethod
    def build(cls, spec: ProblemSpec, n: int = DEFAULT_KNOTS) -> "Kernel":
        grid = Grid(spec.c_max, n)
        x = grid.knots
        H = np.array([expected_stage_cost(spec, x, t) for t in range(spec.k)])
        R = np.array([np.broadcast_to(expected_reset_cost(spec, x, t), x.shape) for t in range(spec.k + 1)])
        return cls(spec, grid, continuation_matrix(grid, spec.demand), H, R)

    def g_row(self, V_next: np.ndarray, t: int) -> np.ndarray:
        """G(z, t) at every knot given the tabulated ``J(., t+1)``."""
        s = self.spec
        return s.costs.c * self.grid.knots + self.H[t] + s.gamma * (self.A @ V_next)


def g_value(spec: ProblemSpec, J_next: TabulatedFunction, z: float, t: int, method: str = "exact") -> float:
    """G(z, t) = c z + H(z, t) + gamma E[J((z - w)^+, t+1)] at an arbitrary ``z``."""
    cont = expected_continuation(J_next, spec.demand, z, method=method) if spec.gamma else 0.0
    return float(spec.costs.c * z + expected_stage_cost(spec, z, t) + spec.gamma * cont)


def no_reset_choice(G: np.ndarray, K: float):
    """Best post-order knot for every starting knot.

    Returns ``(value, target)`` where ``value[i] = min_{j >= i} G[j] + K 1(j > i)``
    and ``target[i]`` is the first minimizing index (ordering nothing wins ties).
    """
    n = G.size
    rev = G[::-1]
    runmin = np.minimum.accumulate(rev)
    last_hit = np.maximum.accumulate(np.where(rev == runmin, np.arange(n), -1))
    suffix_val = runmin[::-1]
    suffix_arg = (n - 1 - last_hit)[::-1]
    # strict suffix: best j > i
    after_val = np.append(suffix_val[1:], np.inf)
    after_arg = np.append(suffix_arg[1:], n - 1)
    hold = G <= K + after_val
    value = np.where(hold, G, K + after_val)
    target = np.where(hold, np.arange(n), after_arg)
    return value, target


def reset_decision(J_R: np.ndarray, J_N: np.ndarray, t: int) -> np.ndarray:
    """Reset where it is no worse than not resetting (ties go to reset).

    The reset state ``(0, 0)`` itself has no reset branch: resetting there
    is a no-op cycle whose value ties with ``v`` at the fixed point.
    """
    out = J_R <= J_N + RESET_TIE_RTOL * (1.0 + np.abs(J_N))
    if t == 0:
        out[0] = False
    return out


@dataclass
class SweepResult:
    v: float
    grid: Grid
    V: np.ndarray  # (k+1, n)
    reset_action: np.ndarray  # (k+1, n) bool
    order_target: np.ndarray  # (k+1, n) post-order level when not resetting
    G: np.ndarray  # (k, n)
    upsilon: float
    phi: float

    def value_function(self, t: int) -> TabulatedFunction:
        return TabulatedFunction(self.grid, self.V[t])


def sweep(spec: ProblemSpec, v: float, kernel: Kernel | None = None, n: int = DEFAULT_KNOTS) -> SweepResult:
    """One backward-induction pass for a candidate reset-state value ``v``."""
    if kernel is None:
        kernel = Kernel.build(spec, n)
    grid, k = kernel.grid, spec.k
    x = grid.knots
    V = np.empty((k + 1, grid.n))
    reset = np.ones((k + 1, grid.n), dtype=bool)
    target = np.tile(x, (k + 1, 1))
    G = np.empty((k, grid.n))
    V[k] = v + kernel.R[k]
    upsilon = phi = None
    for t in range(k - 1, -1, -1):
        G[t] = kernel.g_row(V[t + 1], t)
        best, arg = no_reset_choice(G[t], spec.costs.K)
        J_N = best - spec.costs.c * x
        J_R = v + kernel.R[t]
        reset[t] = reset_decision(J_R, J_N, t)
        V[t] = np.where(reset[t], J_R, J_N)
        target[t] = x[arg]
        if t == 0:
            upsilon, phi = float(best[0]), float(x[arg[0]])
    return SweepResult(v, grid, V, reset, target, G, upsilon, phi)


def reset_state_value(spec: ProblemSpec, result: SweepResult) -> tuple[float, float]:
    """Return ``(upsilon(v), phi(v))`` for a finished sweep."""
    return result.upsilon, result.phi
