import math

import numpy as np
import pytest

from conftest import reference_spec, retail_spec, solved, water_spec
from resetinv.bids import solve
from resetinv.demand import DemandModel
from resetinv.model import NotStronglyConvexError
from resetinv.structure import (
    DO_NOTHING,
    ORDER_UP,
    RESET_HIGH,
    RESET_LOW,
    extract_thresholds,
    gamma_bounds,
    thresholds_from_row,
    verify_sS_conditions,
    verify_value_form,
)

X = np.arange(7) * 0.5


def test_gamma_bound_plug_in_example():
    # exponential(1) on [0, 6]: min f = e^-6, P = 1, L = 1
    spec = retail_spec()
    cert = gamma_bounds(spec)
    m = 5 * math.exp(-6)
    spread = 1 * 6 + 1
    assert cert.m == pytest.approx(np.full(7, m))
    assert np.all(cert.kappa == 4.0)
    assert cert.gamma_t[-1] == pytest.approx(m / (spread * 0.5))
    assert cert.gamma_t[0] == pytest.approx(m / (spread * (0.5 + 1 + 4) + m))
    assert cert.gamma_bound == pytest.approx(cert.gamma_t[0])
    assert cert.M[-1] == 0.5
    assert cert.M[0] == pytest.approx(0.5 + 1 + 4 + m / spread)
    assert not cert.certified


def test_free_terminal_reset_leaves_last_bound_unlimited():
    cert = gamma_bounds(retail_spec(reset_unit=0.0))
    assert cert.gamma_t[-1] == math.inf
    assert np.all(np.isfinite(cert.gamma_t[:-1]))
    assert cert.to_dict()["gamma_t"][-1] == "inf"


def test_gamma0_is_certified_and_bound_below_one():
    cert = gamma_bounds(water_spec(gamma=0.0))
    assert cert.certified
    assert cert.gamma_bound < 1.0


def test_water_without_curvature_raises():
    with pytest.raises(NotStronglyConvexError, match="m_t <= 0"):
        gamma_bounds(water_spec(q=(5.0,) * 7))


def test_row_with_all_four_regions():
    reset = [1, 1, 0, 0, 0, 0, 1]
    target = [0, 0, 2.0, 2.0, 2.0, 2.5, 0]
    row = thresholds_from_row(X, reset, target)
    assert row.certified
    assert (row.sigma, row.s, row.S, row.Sigma) == (1.0, 2.0, 2.0, 3.0)
    assert row.labels == [RESET_LOW, RESET_LOW, ORDER_UP, ORDER_UP, DO_NOTHING, DO_NOTHING, RESET_HIGH]


def test_row_edge_cases():
    all_reset = thresholds_from_row(X, [1] * 7, X)
    assert all_reset.certified
    assert all_reset.sigma == all_reset.s == all_reset.Sigma == math.inf
    assert math.isnan(all_reset.S)
    hold = thresholds_from_row(X, [0] * 7, X)
    assert (hold.sigma, hold.s, hold.Sigma) == (0.0, 0.0, math.inf)
    assert math.isnan(hold.S)


def test_non_contiguous_and_inconsistent_rows_are_flagged():
    gap = thresholds_from_row(X, [0, 1, 0, 0, 1, 0, 0], X)
    assert not gap.certified and "non-contiguous" in gap.problem
    targets = thresholds_from_row(X, [0] * 7, [1.0, 1.5, 1.5, 1.5, 2, 2.5, 3])
    assert not targets.certified and "differ" in targets.problem


@pytest.mark.parametrize(
    "make",
    [
        water_spec,
        lambda **kw: water_spec(demand=DemandModel.exponential(0.6), **kw),
        lambda **kw: retail_spec(demand=DemandModel.truncated_normal(3, 1), K=2.0, reset_fixed=1.0, **kw),
    ],
)
def test_certified_instances_have_threshold_structure(make):
    spec = make()
    spec = spec.with_gamma(0.9 * gamma_bounds(spec).gamma_bound)
    sol = solve(spec)
    policy = extract_thresholds(sol, spec)
    assert policy.certified
    cert = gamma_bounds(spec)
    assert cert.certified
    for t in range(spec.k):
        assert verify_sS_conditions(spec, sol, t).passed
        assert verify_value_form(spec, sol, t, policy, cert).passed


def test_sS_with_no_fixed_cost_collapses_s_onto_S():
    spec = retail_spec(gamma=0.0)
    sol = solve(spec)
    rep = verify_sS_conditions(spec, sol, 0)
    assert rep.passed and rep.s_exists
    assert abs(rep.s - rep.S) <= sol.sweep.grid.step


def test_sS_with_prohibitive_fixed_cost_has_no_s():
    spec = retail_spec(gamma=0.0, K=100.0)
    sol = solve(spec)
    rep = verify_sS_conditions(spec, sol, 0)
    assert not rep.s_exists and rep.passed
    assert np.all(sol.sweep.order_target[0] == sol.sweep.grid.knots)


def test_threshold_policy_replays_tabulated_policy(ref_name):
    spec = reference_spec(ref_name)
    sol = solved(ref_name)
    policy = extract_thresholds(sol, spec)
    assert policy.certified
    x = sol.sweep.grid.knots
    for t in range(spec.k):
        reset, z = policy.decide(x, t)
        assert np.array_equal(reset, sol.sweep.reset_action[t])
        keep = ~reset
        assert np.allclose(z[keep], sol.sweep.order_target[t][keep])
        assert np.all(z[reset] == sol.phi)


def test_value_form_on_reference_instances(ref_name):
    spec = reference_spec(ref_name)
    sol = solved(ref_name)
    policy = extract_thresholds(sol, spec)
    for t in range(spec.k):
        rep = verify_value_form(spec, sol, t, policy)
        assert rep.reset_ok and rep.order_ok and rep.order_slope_ok and rep.nothing_ok


def test_undefined_policy_raises():
    spec = water_spec()
    sol = solve(spec)
    policy = extract_thresholds(sol, spec)
    policy.sigma[2] = np.nan
    with pytest.raises(ValueError, match="undefined"):
        policy.decide(1.0, 2)


def test_cost_scaling_scales_value_and_keeps_policy():
    spec = retail_spec(K=1.0, reset_fixed=0.5)
    base = solve(spec)
    big = solve(spec.scaled(3.0))
    assert big.v_star == pytest.approx(3 * base.v_star, rel=1e-6)
    assert np.array_equal(big.sweep.reset_action, base.sweep.reset_action)
    assert big.phi == base.phi
    assert gamma_bounds(spec.scaled(3.0)).gamma_bound == pytest.approx(gamma_bounds(spec).gamma_bound)


def test_region_measure_counts_knots():
    spec = water_spec()
    policy = extract_thresholds(solve(spec), spec)
    for t in range(spec.k):
        total = sum(policy.region_measure(t, lab) for lab in (RESET_LOW, ORDER_UP, DO_NOTHING, RESET_HIGH))
        assert total == pytest.approx(201 * policy.grid_step)
