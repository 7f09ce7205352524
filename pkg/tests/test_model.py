import math

import numpy as np
import pytest
from scipy import integrate

from conftest import retail_spec, water_spec
from resetinv.demand import DemandModel
from resetinv.model import (
    NotStronglyConvexError,
    State,
    expected_reset_cost,
    expected_stage_cost,
    realized_stage_cost,
    structure_constants,
    transition,
)


def test_transition_examples():
    spec = water_spec()
    assert transition(spec, State(3, 2), 0, 1, 2) == State(2, 3)
    assert transition(spec, State(3, 2), 1, 1, 5) == State(0, 1)
    assert transition(spec, State(0, 0), 0, 0, 0) == State(0, 1)


def test_transition_rejects_capacity_violation():
    spec = water_spec()
    with pytest.raises(ValueError):
        transition(spec, State(5, 1), 0, 2, 0)
    with pytest.raises(ValueError):
        transition(spec, State(1, 1), 0, -0.1, 0)
    # after a reset the whole tank is available
    assert transition(spec, State(5, 1), 1, 6, 0) == State(6, 1)


def test_stage_cost_at_zero_is_shortage_of_mean_demand():
    for spec in (water_spec(), retail_spec(), retail_spec(demand=DemandModel.truncated_normal(3, 1))):
        for t in range(spec.k):
            assert expected_stage_cost(spec, 0.0, t) == pytest.approx(spec.costs.p * spec.demand.mean, rel=1e-12)


def test_retail_stage_cost_example():
    spec = retail_spec(p=4.0, q=1.0)
    assert expected_stage_cost(spec, 1.0, 0) == pytest.approx(5 * math.exp(-1), rel=1e-12)
    assert expected_stage_cost(spec, 1.0, 0) == pytest.approx(1.8394, abs=1e-4)


def _quad(fn, a, b):
    return integrate.quad(fn, a, b, limit=400, epsabs=1e-12)[0]


@pytest.mark.parametrize("demand", [DemandModel.exponential(1.0), DemandModel.truncated_normal(2, 1)], ids=repr)
def test_stage_cost_matches_raw_integrals(demand):
    """H from closed forms vs. direct quadrature of the shortage/holding integrals."""
    f = demand.density
    hi = demand.upper_support(1e-14)
    retail = retail_spec(demand=demand, p=4.0, q=1.5)
    water = water_spec(demand=demand)
    for z in (0.0, 0.4, 1.3, 3.0, 6.0):
        short = _quad(lambda w: (w - z) * f(w), z, max(hi, z + 1))
        over = _quad(lambda w: (z - w) * f(w), 0, z) if z > 0 else 0.0
        assert over == pytest.approx(z - demand.mean + demand.loss(z), abs=1e-10)
        assert expected_stage_cost(retail, z, 0) == pytest.approx(4.0 * short + 1.5 * over, abs=1e-9)
        for t in (0, 6):
            q = water.q[t]
            ref = (water.costs.p - q) * short + q * demand.mean
            assert expected_stage_cost(water, z, t) == pytest.approx(ref, abs=1e-9)


def test_reset_cost_examples():
    assert expected_reset_cost(water_spec(reset_unit=0.5), 2.0, 3) == 1.0
    assert expected_reset_cost(retail_spec(reset_unit=0.5, reset_fixed=3.0), 0.0, 1) == 3.0
    assert expected_reset_cost(water_spec(), 0.0, 4) == 0.0


@pytest.mark.parametrize("make", [water_spec, lambda: retail_spec(K=2.0, q=1.5)])
def test_realized_cost_averages_to_expected(make):
    spec = make()
    rng = np.random.default_rng(11)
    w = spec.demand.sample(rng, 400_000)
    for xi, u, t in [(0.0, 2.5, 0), (1.0, 0.0, 3), (0.5, 4.0, 6)]:
        z = xi + u
        costs = realized_stage_cost(spec, u, z, w, t)
        expected = spec.costs.c * u + spec.costs.K * (u > 0) + expected_stage_cost(spec, z, t)
        se = costs.std() / math.sqrt(w.size)
        assert abs(costs.mean() - expected) <= 3 * se


@pytest.mark.parametrize("make", [water_spec, retail_spec, lambda: retail_spec(demand=DemandModel.truncated_normal(3, 1))])
def test_stage_cost_convex_with_density_curvature(make):
    spec = make()
    z = np.linspace(0, spec.c_max, 601)
    h = 1e-3
    for t in range(spec.k):
        H = expected_stage_cost(spec, z, t)
        assert np.all(np.diff(H, 2) >= -1e-8)
        zi = z[1:-1]
        curv = (expected_stage_cost(spec, zi + h, t) - 2 * expected_stage_cost(spec, zi, t)
                + expected_stage_cost(spec, zi - h, t)) / h**2
        weight = spec.costs.p - spec.q[t] if spec.kind == "water" else spec.costs.p + spec.q[t]
        exact = weight * spec.demand.density(zi)
        assert np.all(np.abs(curv - exact) <= 1e-3 * np.abs(exact) + 1e-6)


@pytest.mark.parametrize("make", [water_spec, retail_spec, lambda: retail_spec(q=6.0, demand=DemandModel.exponential(0.3))])
def test_stage_cost_slope_bounded_by_kappa(make):
    spec = make()
    sc = structure_constants(spec)
    z = np.linspace(0, spec.c_max, 2001)
    h = 1e-5
    for t in range(spec.k):
        lo = np.maximum(z - h, 0.0)
        hi = z + h
        slope = (expected_stage_cost(spec, hi, t) - expected_stage_cost(spec, lo, t)) / (hi - lo)
        assert np.max(np.abs(slope)) <= sc.kappa[t] + 1e-6


def test_structure_constants_retail_example():
    d = DemandModel.truncated_normal(3, 1)
    spec = retail_spec(demand=d, p=4.0, q=1.0, reset_unit=0.5)
    sc = structure_constants(spec)
    fmin = np.min(d.density(np.linspace(0, 6, 100_001)))
    assert np.allclose(sc.m, 5 * fmin, rtol=1e-9)
    assert np.all(sc.m > 0)
    assert np.all(sc.eta == 0.5)
    assert np.all(sc.L_reset == 0)
    # |dH/dz| reaches p at z = 0, so the slope bound is max(p, q)
    assert np.all(sc.kappa == 4.0)


def test_structure_constants_water():
    spec = water_spec(q=tuple(1 + 0.3 * t for t in range(7)))
    sc = structure_constants(spec)
    assert np.all(np.diff(sc.kappa) < 0)
    assert np.allclose(sc.kappa, 5 - spec.q)
    with pytest.raises(NotStronglyConvexError, match="m_t <= 0"):
        structure_constants(water_spec(q=(1, 2, 3, 4, 5, 5, 5)))
    assert not water_spec(q=(1, 2, 3, 4, 5, 5, 5)).structure_guaranteed
    assert water_spec().structure_guaranteed


def test_problem_validation():
    with pytest.raises(ValueError):
        water_spec(gamma=1.0)
    with pytest.raises(ValueError):
        water_spec(q=(3, 2, 1, 1, 1, 1, 1))
    with pytest.raises(ValueError):
        water_spec(K=1.0)
    with pytest.raises(ValueError):
        retail_spec(q=(1.0, 2.0))
    assert retail_spec(q=1.5).q.shape == (7,)
