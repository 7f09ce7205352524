"""Policy structure: discount-factor certificate, threshold extraction, checks.

When the discount factor is below the certified bound, each epoch's optimal
policy splits the stock axis into at most four contiguous regions:
reset (low stock), order up to S, do nothing, reset (high stock). This
module recovers those thresholds from a tabulated solution and checks the
accompanying (s, S) conditions and value-function form on grid knots.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .model import ProblemSpec, expected_reset_cost, structure_constants

INF = float("inf")

RESET_LOW, ORDER_UP, DO_NOTHING, RESET_HIGH = "reset_low", "order_up", "do_nothing", "reset_high"
_ROW_PATTERN = re.compile(r"^(R*)(O*)(N*)(R*)$")


@dataclass
class GammaCertificate:
    gamma_t: np.ndarray  # t = 0..k-1
    gamma_bound: float
    M: np.ndarray  # t = 0..k
    m: np.ndarray
    kappa: np.ndarray
    eta: np.ndarray
    c: float
    L: float
    P: float
    c_max: float
    gamma: float

    @property
    def certified(self) -> bool:
        return bool(self.gamma <= self.gamma_bound)

    def to_dict(self) -> dict:
        def f(a):
            return [_num(v) for v in np.atleast_1d(a)]

        return {
            "certified": self.certified,
            "gamma": self.gamma,
            "gamma_bound": _num(self.gamma_bound),
            "gamma_t": f(self.gamma_t),
            "M_t": f(self.M),
            "m_t": f(self.m),
            "kappa_t": f(self.kappa),
            "eta_t": f(self.eta),
            "c": self.c,
            "L": self.L,
            "P": self.P,
            "c_max": self.c_max,
        }


def _num(v):
    v = float(v)
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return None if np.isnan(v) else v


def gamma_bounds(spec: ProblemSpec) -> GammaCertificate:
    """Largest discount factors for which the four-region structure is guaranteed.

    Raises :class:`~resetinv.model.NotStronglyConvexError` if some ``m_t <= 0``.
    """
    sc = structure_constants(spec)
    k, c = spec.k, spec.costs.c
    spread = sc.L * spec.c_max + sc.P
    m, kappa, eta = sc.m, sc.kappa, sc.eta
    g = np.empty(k)
    with np.errstate(divide="ignore"):
        g[k - 1] = m[k - 1] / (spread * eta[k]) if eta[k] > 0 else INF
        for t in range(k - 1):
            g[t] = m[t] / (spread * (eta[t + 1] + c + kappa[t + 1]) + m[t + 1])
    M = np.empty(k + 1)
    M[k] = eta[k]
    M[:k] = eta[:k] + c + kappa + m / spread
    bound = min(float(g.min()), np.nextafter(1.0, 0.0))
    return GammaCertificate(g, bound, M, m, kappa, eta, c, sc.L, sc.P, spec.c_max, spec.gamma)


# ----------------------------------------------------------------------
# threshold extraction


@dataclass
class RowThresholds:
    sigma: float
    s: float
    S: float  # nan when the order region is empty
    Sigma: float
    labels: list
    certified: bool
    problem: str = ""


def _runs(codes: str):
    return [(m.group(0)[0], m.start(), m.end()) for m in re.finditer(r"R+|O+|N+", codes)]


def thresholds_from_row(x, reset, target) -> RowThresholds:
    """Read ``(sigma, s, S, Sigma)`` off one epoch's tabulated policy.

    ``x`` are knot coordinates, ``reset`` the reset flags and ``target`` the
    post-order levels. Thresholds are knot coordinates, ``inf`` when the
    corresponding boundary is never crossed.
    """
    x = np.asarray(x, dtype=float)
    reset = np.asarray(reset, dtype=bool)
    target = np.asarray(target, dtype=float)
    order = ~reset & (target > x)
    codes = "".join("R" if r else ("O" if o else "N") for r, o in zip(reset, order))
    n = len(codes)

    def at(i):
        return float(x[i]) if i < n else INF

    match = _ROW_PATTERN.match(codes)
    if match is None:
        runs = ", ".join(f"{c}[{a}:{b}]" for c, a, b in _runs(codes))
        return RowThresholds(np.nan, np.nan, np.nan, np.nan, _labels(codes, None), False, f"non-contiguous regions: {runs}")
    low, up, nothing, high = (len(g) for g in match.groups())
    if low == n:
        # resetting everywhere
        return RowThresholds(INF, INF, np.nan, INF, [RESET_LOW] * n, True)
    i_sigma = low
    i_s = low + up
    i_Sigma = low + up + nothing
    S = np.nan
    if up:
        levels = np.unique(target[i_sigma:i_s])
        if levels.size != 1:
            return RowThresholds(np.nan, np.nan, np.nan, np.nan, _labels(codes, match), False,
                                 f"order-up targets differ: {levels.tolist()}")
        S = float(levels[0])
    return RowThresholds(at(i_sigma), at(i_s), S, at(i_Sigma) if high else INF, _labels(codes, match), True)


def _labels(codes: str, match):
    if match is None:
        return [RESET_LOW if c == "R" else ORDER_UP if c == "O" else DO_NOTHING for c in codes]
    low = len(match.group(1))
    out = []
    for i, c in enumerate(codes):
        if c == "R":
            out.append(RESET_LOW if i < low else RESET_HIGH)
        else:
            out.append(ORDER_UP if c == "O" else DO_NOTHING)
    return out


@dataclass
class ThresholdPolicy:
    """Four-threshold policy; row ``t`` applies to epochs ``t = 0..k-1``."""

    sigma: np.ndarray
    s: np.ndarray
    S: np.ndarray
    Sigma: np.ndarray
    phi: float
    region_labels: list
    grid_step: float
    violations: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.sigma)

    @property
    def certified(self) -> bool:
        return not self.violations

    def decide(self, x, t):
        """Vectorized action: ``(reset, post_order_level)`` for states with ``t < k``."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t)
        sigma, s, S, Sigma = self.sigma[t], self.s[t], self.S[t], self.Sigma[t]
        if np.any(np.isnan(sigma)):
            bad = np.unique(t[np.isnan(sigma)])
            raise ValueError(f"threshold policy undefined at t={bad.tolist()}")
        reset = (x < sigma) | (x >= Sigma)
        order = ~reset & (x < s)
        z = np.where(reset, self.phi, np.where(order, np.maximum(S, x), x))
        return reset, z

    def thresholds(self, t: int) -> dict:
        return {
            "t": t,
            "sigma": _num(self.sigma[t]),
            "s": _num(self.s[t]),
            "S": _num(self.S[t]),
            "Sigma": _num(self.Sigma[t]),
            "phi": self.phi,
        }

    def region_measure(self, t: int, label: str | None = None) -> float:
        """Length of stock axis labelled ``label`` (both reset regions when None) at grid resolution."""
        labels = self.region_labels[t]
        wanted = {RESET_LOW, RESET_HIGH} if label is None else {label}
        return sum(lab in wanted for lab in labels) * self.grid_step


def extract_thresholds(solution, spec: ProblemSpec) -> ThresholdPolicy:
    sw = solution.sweep
    x = sw.grid.knots
    rows = [thresholds_from_row(x, sw.reset_action[t], sw.order_target[t]) for t in range(spec.k)]
    violations = [(t, r.problem) for t, r in enumerate(rows) if not r.certified]
    return ThresholdPolicy(
        sigma=np.array([r.sigma for r in rows]),
        s=np.array([r.s for r in rows]),
        S=np.array([r.S for r in rows]),
        Sigma=np.array([r.Sigma for r in rows]),
        phi=solution.phi,
        region_labels=[r.labels for r in rows],
        grid_step=sw.grid.step,
        violations=violations,
    )


# ----------------------------------------------------------------------
# certification checks


def _scale(a) -> float:
    return 1.0 + float(np.max(np.abs(a)))


@dataclass
class SSReport:
    t: int
    S: float
    s_exists: bool
    s: float
    C1: bool
    C2: bool
    C3: bool
    C4: bool
    tol: float
    notes: str = ""

    @property
    def passed(self) -> bool:
        return self.C1 and self.C2 and self.C3 and self.C4

    def to_dict(self) -> dict:
        return {"t": self.t, "S": self.S, "s_exists": self.s_exists, "s": _num(self.s),
                "C1": self.C1, "C2": self.C2, "C3": self.C3, "C4": self.C4,
                "tol": self.tol, "passed": self.passed, "notes": self.notes}


def verify_sS_conditions(spec: ProblemSpec, solution, t: int, rtol: float = 1e-6) -> SSReport:
    """Check the (s, S) conditions C1-C4 on the tabulated G(., t).

    ``s`` is taken as the first knot where G drops to ``G(S) + K``; C1 is
    checked at grid resolution (the crossing lies in the cell ending at s).
    """
    G = solution.sweep.G[t]
    x = solution.sweep.grid.knots
    K = spec.costs.K
    tol = rtol * _scale(G)
    iS = int(np.argmin(G))
    level = G[iS] + K
    if G[0] < level - tol:
        # order region collapses; conditions hold vacuously
        return SSReport(t, float(x[iS]), False, np.nan, True, True, True, True, tol,
                        "s does not exist: G(0) < G(S) + K")
    i_s = int(np.argmax(G <= level + tol))
    C1 = bool(G[i_s] <= level + tol and (i_s == 0 or G[i_s - 1] >= level - tol))
    C2 = bool(np.all(np.diff(G[: i_s + 1]) <= tol))
    C3 = bool(np.all(G[:i_s] >= level - tol))
    tail = G[i_s:]
    suffix_min = np.minimum.accumulate(tail[::-1])[::-1]
    C4 = bool(np.all(tail - suffix_min <= K + tol))
    return SSReport(t, float(x[iS]), True, float(x[i_s]), C1, C2, C3, C4, tol)


@dataclass
class ValueFormReport:
    t: int
    reset_ok: bool
    order_ok: bool
    order_slope_ok: bool
    nothing_ok: bool
    max_slope: float
    slope_bound: float
    slope_ok: bool
    max_error: float

    @property
    def passed(self) -> bool:
        return self.reset_ok and self.order_ok and self.order_slope_ok and self.nothing_ok and self.slope_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["slope_bound"] = _num(self.slope_bound)
        d["passed"] = self.passed
        return d


def verify_value_form(spec: ProblemSpec, solution, t: int, policy: ThresholdPolicy,
                      certificate: GammaCertificate | None = None, rtol: float = 1e-6) -> ValueFormReport:
    """Check the four-piece form of J(., t) on grid knots."""
    sw = solution.sweep
    x = sw.grid.knots
    V = sw.V[t]
    G = sw.G[t]
    c, K = spec.costs.c, spec.costs.K
    labels = np.array(policy.region_labels[t])
    tol = rtol * (1.0 + np.abs(V))
    R = np.broadcast_to(expected_reset_cost(spec, x, t), x.shape)
    errs = [0.0]

    def close(mask, expected):
        if not mask.any():
            return True
        e = np.abs(V[mask] - expected[mask])
        errs.append(float(e.max()))
        return bool(np.all(e <= tol[mask]))

    is_reset = (labels == RESET_LOW) | (labels == RESET_HIGH)
    reset_ok = close(is_reset, solution.v_star + R)
    order = labels == ORDER_UP
    if order.any():
        iS = int(round(policy.S[t] / sw.grid.step))
        order_ok = close(order, G[iS] + K - c * x)
    else:
        order_ok = True
    idx = np.flatnonzero(order)
    pairs = idx[:-1][np.diff(idx) == 1]
    slopes = (V[pairs + 1] - V[pairs]) / sw.grid.step
    order_slope_ok = bool(np.all(np.abs(slopes + c) <= rtol * (1.0 + c)))
    nothing_ok = close(labels == DO_NOTHING, G - c * x)
    max_slope = float(np.max(np.abs(np.diff(V))) / sw.grid.step)
    bound = float(certificate.M[t]) if certificate is not None else INF
    slope_ok = max_slope <= bound * (1 + rtol) + rtol
    return ValueFormReport(t, reset_ok, order_ok, order_slope_ok, nothing_ok, max_slope, bound, slope_ok, max(errs))
