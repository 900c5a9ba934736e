import math

import pytest
from hypothesis import given, settings, strategies as st

from sparetime.allocator import (
    InfeasibleAllocation,
    TimeAllocation,
    allocation_csv,
    check_feasibility,
    read_allocation_csv,
    solve_allocation,
    spare_time,
)
from sparetime.core import EgoNetwork, ModelParams
from sparetime.oracle import allocation_oracle

# two alters: x~ = (40, 15), gamma = 0.63, 1/beta = 0.78, Y = Z = 45
PAIR_NET = EgoNetwork.from_demands([40.0, 15.0])
PAIR_PARAMS = ModelParams(beta=1 / 0.78, z_max=45.0, avatar_budget_Y=45.0).with_gamma(0.63)


def test_two_alter_instance():
    alloc = solve_allocation(PAIR_NET, PAIR_PARAMS)
    assert alloc.Ysum == pytest.approx(45.0)
    assert alloc.y == pytest.approx((45 * 40 / 55, 45 * 15 / 55))
    assert alloc.y[0] == pytest.approx(32.727, abs=1e-3)
    assert alloc.objective() == pytest.approx(48.25, abs=1e-9)
    assert spare_time(alloc, PAIR_NET, PAIR_PARAMS) == pytest.approx(6.75, abs=1e-9)
    assert check_feasibility(alloc, PAIR_NET, PAIR_PARAMS) == []


def test_two_alter_matches_oracle():
    ref = allocation_oracle(PAIR_NET, PAIR_PARAMS, resolution=1000)
    assert ref.ysum == pytest.approx(45.0, abs=ref.grid_step)
    assert solve_allocation(PAIR_NET, PAIR_PARAMS).objective() == pytest.approx(ref.objective, abs=1e-6)


def test_case_b_zero_avatar_time():
    net = EgoNetwork.from_demands([30.0, 12.0, 7.5])
    p = ModelParams(avatar_budget_Y=100.0).with_gamma(0.8)
    alloc = solve_allocation(net, p)
    assert alloc.y == (0.0, 0.0, 0.0)
    assert alloc.x == tuple(net.demands)
    assert alloc.objective() == net.baseline_capacity
    assert spare_time(alloc, net, p) == 0.0


def test_no_budget():
    net = EgoNetwork.from_demands([30.0, 12.0])
    alloc = solve_allocation(net, ModelParams(avatar_budget_Y=0.0))
    assert alloc.y == (0.0, 0.0) and alloc.x == (30.0, 12.0)


def test_budget_at_baseline_point():
    net = EgoNetwork.from_demands([1288.0 / 4] * 4)
    p = ModelParams(z_max=300.0, avatar_budget_Y=1288.0).with_gamma(0.2)
    alloc = solve_allocation(net, p)
    assert alloc.Ysum == pytest.approx(1288.0)
    assert spare_time(alloc, net, p) == pytest.approx((1 / 1.29 - 0.2) * 1288.0, abs=1e-9)
    assert spare_time(alloc, net, p) == pytest.approx(740.85, abs=0.01)


def test_regime_boundary_objective_flat():
    net = EgoNetwork.from_demands([20.0, 10.0])
    p = ModelParams(avatar_budget_Y=25.0).with_gamma(1 / 1.29)
    alloc = solve_allocation(net, p)
    assert alloc.Ysum == pytest.approx(25.0)
    assert alloc.objective() == pytest.approx(net.baseline_capacity, abs=1e-9)
    assert allocation_oracle(net, p).flat


def test_capacity_deficit_lower_bound():
    net = EgoNetwork.from_demands([40.0, 15.0])
    deficit = 3.0
    p = ModelParams(avatar_budget_Y=45.0, z_max=1000.0, x_prime=55.0 - deficit).with_gamma(0.63)
    alloc = solve_allocation(net, p)
    assert alloc.Ysum >= deficit / (1 / 1.29 - 0.63)
    assert check_feasibility(alloc, net, p) == []


def test_infeasible_reports_bounds():
    net = EgoNetwork.from_demands([40.0, 15.0])
    with pytest.raises(InfeasibleAllocation) as err:
        solve_allocation(net, ModelParams(avatar_budget_Y=5.0, x_prime=40.0).with_gamma(0.63))
    assert err.value.cap == pytest.approx(5.0)
    assert err.value.lower_bound == pytest.approx(15.0 / (1 / 1.29 - 0.63))
    with pytest.raises(InfeasibleAllocation):
        solve_allocation(net, ModelParams(avatar_budget_Y=50.0, x_prime=50.0).with_gamma(0.8))


def test_injected_violations():
    net = EgoNetwork.from_demands([40.0, 15.0])
    p = ModelParams(avatar_budget_Y=1000.0, z_max=45.0).with_gamma(0.63)
    too_big = TimeAllocation((0.0, 0.0), (1.29 * 40.0 + 1.0, 0.0), 0.63)
    found = {v.constraint: v for v in check_feasibility(too_big, net, p)}
    assert found["y_box"].residual == pytest.approx(1.0)

    cap = 45.0 / 0.63
    over = TimeAllocation((40.0 - (cap + 1) / 2 / 1.29, 15.0), ((cap + 1) / 2, (cap + 1) / 2), 0.63)
    assert "y_cap_debrief" in {v.constraint for v in check_feasibility(over, net, p)}


def test_greedy_split_same_objective():
    net = EgoNetwork.from_demands([40.0, 15.0, 3.0])
    p = ModelParams(avatar_budget_Y=30.0).with_gamma(0.5)
    prop = solve_allocation(net, p)
    greedy = solve_allocation(net, p, strategy="greedy")
    assert greedy.objective() == pytest.approx(prop.objective())
    assert check_feasibility(greedy, net, p) == []


def test_csv_round_trip():
    alloc = solve_allocation(PAIR_NET, PAIR_PARAMS)
    text = allocation_csv(alloc)
    assert text.splitlines()[0] == "alter_id,x_hours,y_hours"
    assert read_allocation_csv(text, alloc.gamma) == alloc


demands = st.lists(st.floats(0.5, 200.0), min_size=1, max_size=10)


@settings(max_examples=200, deadline=None)
@given(demands, st.floats(0.05, 1.0), st.floats(0.0, 3000.0), st.floats(0.0, 500.0))
def test_solver_matches_oracle(ds, gamma, budget, z_max):
    net = EgoNetwork.from_demands(ds)
    p = ModelParams(avatar_budget_Y=budget, z_max=z_max).with_gamma(gamma)
    alloc = solve_allocation(net, p)
    ref = allocation_oracle(net, p, resolution=1000)
    tol = abs(gamma - 1 / 1.29) * ref.grid_step + 1e-6
    assert alloc.objective() == pytest.approx(ref.objective, abs=tol)
    assert check_feasibility(alloc, net, p) == []


@given(demands, st.floats(0.0, 2000.0))
def test_spare_time_non_increasing_in_gamma(ds, budget):
    net = EgoNetwork.from_demands(ds)
    spares = []
    for g in [0.05 * i for i in range(1, 20)]:
        p = ModelParams(avatar_budget_Y=budget).with_gamma(g)
        spares.append(spare_time(solve_allocation(net, p), net, p))
    assert all(b <= a + 1e-9 for a, b in zip(spares, spares[1:]))


@given(demands, st.floats(1.1, 5.0))
def test_scaling_demands_keeps_binding_cap(ds, factor):
    net = EgoNetwork.from_demands(ds)
    scaled = EgoNetwork.from_demands([d * factor for d in ds])
    p = ModelParams(avatar_budget_Y=100.0).with_gamma(0.4)
    a, b = solve_allocation(net, p), solve_allocation(scaled, p)
    box = math.fsum(1.29 * d for d in ds)
    if box >= min(100.0, 304.0 / 0.4):
        assert a.Ysum == pytest.approx(b.Ysum)
    assert b.Ysum >= a.Ysum - 1e-9
