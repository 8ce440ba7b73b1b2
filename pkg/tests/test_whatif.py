import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from co2intensity import lp as lpcore
from co2intensity.dispatch import solve_dispatch
from co2intensity.model import Commodity, EnergySystem, Output, Process, ProcessKind, StorageParams
from co2intensity.scenarios import builtin
from co2intensity.whatif import (FD_RELATIVE_STEP, FDEstimate, InfeasiblePerturbation, Method,
                                 compute_whatif, default_fd_step, fd_sweep, finite_difference)

from helpers import power_to_gas_system, random_system


def bus(demand, *, pv_cap=1.0, gas_cap=np.inf) -> EnergySystem:
    procs = (Process("pv", ProcessKind.IMPORT, outputs=(Output("elec", capacity=pv_cap),)),
             Process("gas", ProcessKind.IMPORT, outputs=(Output("elec", capacity=gas_cap, cost=50.0, emission=0.4),)),
             Process("load", ProcessKind.DEMAND, inputs=("elec",)))
    return EnergySystem((Commodity("elec"),), procs, len(demand), 1.0, {("load", "elec"): tuple(demand)})


def test_merit_order_margins():
    res = compute_whatif(bus([0.5, 1.0, 1.5, 0.0]))
    np.testing.assert_allclose(res.intensity["elec"], [0.0, 0.4, 0.4, 0.0], atol=1e-12)
    assert res.method["elec"] == [Method.BASIS] * 4
    assert res.n_fallback() == 0


def test_kink_is_flagged_with_both_sides():
    res = compute_whatif(bus([0.5, 1.0, 1.5]))
    assert set(res.degenerate) == {("elec", 1)}
    forward, backward = res.degenerate[("elec", 1)]
    assert forward == pytest.approx(0.4) and backward == pytest.approx(0.0, abs=1e-9)


def test_basis_values_without_fallback():
    res = compute_whatif(bus([1.0]), fd_fallback=False)
    assert res.intensity["elec"][0] == pytest.approx(0.4)
    assert not res.degenerate


def test_step_limit_is_distance_to_next_kink():
    res = compute_whatif(bus([0.5, 1.5], gas_cap=2.0))
    np.testing.assert_allclose(res.step_limit["elec"], [0.5, 1.5])


def test_infeasible_increase_raises():
    system = bus([0.5, 1.0], gas_cap=0.0)
    with pytest.raises(InfeasiblePerturbation):
        compute_whatif(system)
    with pytest.raises(InfeasiblePerturbation):
        finite_difference(system, "elec", 1)


def test_chp_with_heater_and_storage_margins(runs):
    # heater covers marginal heat at 0.2 / 0.8; the CHP covers electricity
    res = runs.whatif("mc1")
    idle_hours = slice(18, 24)
    np.testing.assert_allclose(res.intensity["heat"][idle_hours], 0.25, rtol=1e-12)
    np.testing.assert_allclose(res.intensity["elec"][idle_hours], 0.25, rtol=1e-12)


def test_mc1_discharge_hours_split_around_heater_level(runs):
    # with an uncapped heater, marginal heat can never cost more than the heater,
    # so heat sits at or below 0.25 and electricity at or above it
    d = runs.dispatch("mc1")
    res = runs.whatif("mc1")
    discharge = d.e_out[("heat_storage", "heat")] > 1e-6
    assert discharge.any()
    assert np.all(res.intensity["heat"][discharge] <= 0.25 + 1e-9)
    assert np.all(res.intensity["elec"][discharge] >= 0.25 - 1e-9)
    assert np.sum(res.intensity["elec"][discharge] - res.intensity["heat"][discharge] > 1e-6) >= 6


@pytest.mark.parametrize("name, co, t, value", [
    ("sc1", "elec", 0, 0.41 / 0.45),
    ("sc1", "elec", 10, 0.2 / 0.6),
    ("sc2", "elec", 0, 0.3075815648093067),
    ("mc1", "elec", 1, 0.311429859183529),
    ("mc2", "heat", 24, 0.21501458866032205),
    ("mc3", "elec", 7, 0.5714285714285714),
])
def test_builtin_frozen_values(runs, name, co, t, value):
    assert runs.whatif(name).intensity[co][t] == pytest.approx(value, rel=1e-9)


def test_sc1_single_kink(runs):
    res = runs.whatif("sc1")
    assert list(res.degenerate) == [("elec", 4)]
    assert res.degenerate[("elec", 4)] == pytest.approx((0.2 / 0.6, 0.41 / 0.45))


@pytest.mark.parametrize("name, solves", [("sc2", 1), ("mc1", 0), ("mc3", 0)])
def test_one_factorization_for_the_sweep(name, solves):
    # sc2 spends one extra solve on a backward kink check where the basis is blocked downwards
    system = builtin(name)
    d = solve_dispatch(system)
    lpcore.reset_counters()
    res = compute_whatif(system, d)
    assert (lpcore.COUNTERS["lp_solves"], lpcore.COUNTERS["factorizations"]) == (solves, 1)
    assert res.n_fallback() == 0


def test_default_fd_step():
    assert default_fd_step(bus([0.5, 2.0]), "elec") == pytest.approx(FD_RELATIVE_STEP * 2.0)
    assert default_fd_step(bus([0.0, 0.0]), "elec") == FD_RELATIVE_STEP


def test_fd_estimate():
    est = FDEstimate(0.4, 0.0, 1e-4)
    assert est.kink() and float(est) == 0.4 == est.value
    assert not FDEstimate(0.4).kink()


def test_power_to_gas_matches_finite_differences():
    system = power_to_gas_system()
    base = solve_dispatch(system)
    res = compute_whatif(system, base)
    fd = fd_sweep(system, base)
    for (co, t), ref in fd.items():
        if (co, t) not in res.degenerate:
            assert res.intensity[co][t] == pytest.approx(ref, abs=1e-6, rel=1e-4)


def storage_bus() -> EnergySystem:
    procs = (Process("pv", ProcessKind.IMPORT, outputs=(Output("elec", capacity=2.0, availability=(1.0, 0.0, 0.0)),)),
             Process("gas", ProcessKind.IMPORT, outputs=(Output("elec", cost=50.0, emission=0.4),)),
             Process("bat", ProcessKind.STORAGE, inputs=("elec",), outputs=(Output("elec"),),
                     storage=StorageParams(charge_efficiency=0.9, self_discharge=0.1, energy_capacity=5.0)),
             Process("load", ProcessKind.DEMAND, inputs=("elec",)))
    return EnergySystem((Commodity("elec"),), procs, 3, 1.0, {("load", "elec"): (0.5, 0.5, 1.0)})


def test_storage_shifts_the_margin_back_in_time():
    # PV surplus at t=0 is stored and gas tops up at t=2; extra demand earlier
    # leaves less in storage, lost at 0.9 charging and 10 % per step
    res = compute_whatif(storage_bus())
    np.testing.assert_allclose(res.intensity["elec"], [0.4 * 0.9 * 0.9**2, 0.4 * 0.9, 0.4], rtol=1e-12)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1))
def test_basis_agrees_with_finite_differences_on_random_systems(seed):
    system = random_system(np.random.default_rng(seed), max_horizon=4)
    base = solve_dispatch(system)
    res = compute_whatif(system, base)
    try:
        fd = fd_sweep(system, base)
    except InfeasiblePerturbation:
        return
    for (co, t), ref in fd.items():
        if (co, t) not in res.degenerate:
            assert res.intensity[co][t] == pytest.approx(ref, abs=1e-6, rel=1e-4)
