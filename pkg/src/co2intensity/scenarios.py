"""Factories for the single-commodity (SC) and multi-commodity (MC) test systems."""

from __future__ import annotations

import numpy as np

from .model import (INF, Commodity, EnergySystem, Output, Process, ProcessKind,
                    StorageParams)

# SC system
SC_HORIZON = 24
SC_PEAK_DEMAND = 1.5          # GW, reached at hour 10 and held
SC_RAMP_END = 10
LIGNITE_CO2 = 0.41            # t/MWh fuel
GAS_CO2 = 0.20
SPP_EFFICIENCY = 0.45
CC_EFFICIENCY = 0.60
SPP_CAPACITY = 0.75
PV_CAPACITY_SC = 1.3
SC_COSTS = {"pv": 0.0, "spp": 30.0, "gas_cc": 50.0}
SC_STORAGE_CAPACITY = 6.0     # GWh, tunable
SELF_DISCHARGE = 0.01

# MC system
MC_DAY = 24
CHP_ELEC_EFFICIENCY = 0.35
CHP_TOTAL_EFFICIENCY = 0.80
HEAT_STORAGE_CHARGE_EFFICIENCY = 0.95
MC_STORAGE_CAPACITY = 5.15    # GWh, tuned so day 2 has one mixed-supply hour
ELEC_BASE = 0.6               # GW, constant; CHP heat at 50% lies below mean heat demand
HEAT_PEAK = 1.0               # GW
HEAT_PEAK_HOUR = 18.0         # clock hour of maximum heat demand
PV_MARGIN = 0.1
MC_DEMAND_SHARES = {1: (0.5, 1.0), 2: (0.0, 1.0), 3: (1.0, 0.3)}


def step_end_hours(horizon: int, dt: float = 1.0) -> np.ndarray:
    """Clock time at the end of each step; step t covers ``(t*dt, (t+1)*dt]``."""
    return dt * (np.arange(horizon, dtype=float) + 1.0)


def sc_demand(horizon: int = SC_HORIZON) -> np.ndarray:
    t = step_end_hours(horizon)
    return SC_PEAK_DEMAND * np.minimum(t / SC_RAMP_END, 1.0)


def sc_pv_availability(horizon: int = SC_HORIZON) -> np.ndarray:
    t = step_end_hours(horizon)
    rise = (t - 10.0) / 7.0
    fall = (24.0 - t) / 7.0
    return np.clip(np.minimum(rise, fall), 0.0, 1.0)


def make_sc_system(scenario: int) -> EnergySystem:
    """Single-commodity electricity system; scenario 2 adds a storage."""
    if scenario not in (1, 2):
        raise ValueError(f"SC scenario must be 1 or 2, got {scenario!r}")
    T = SC_HORIZON
    elec = "elec"
    processes = [
        Process("spp", ProcessKind.IMPORT, outputs=(Output(
            elec, capacity=SPP_CAPACITY, cost=SC_COSTS["spp"],
            emission=LIGNITE_CO2 / SPP_EFFICIENCY),)),
        Process("gas_cc", ProcessKind.IMPORT, outputs=(Output(
            elec, cost=SC_COSTS["gas_cc"], emission=GAS_CO2 / CC_EFFICIENCY),)),
        Process("pv", ProcessKind.IMPORT, outputs=(Output(
            elec, capacity=PV_CAPACITY_SC, cost=SC_COSTS["pv"],
            availability=_tup(sc_pv_availability(T))),)),
    ]
    if scenario == 2:
        processes.append(Process(
            "storage", ProcessKind.STORAGE, inputs=(elec,), outputs=(Output(elec),),
            storage=StorageParams(charge_efficiency=1.0, self_discharge=SELF_DISCHARGE,
                                  energy_capacity=SC_STORAGE_CAPACITY)))
    processes.append(Process("demand", ProcessKind.DEMAND, inputs=(elec,)))
    return EnergySystem(
        commodities=(Commodity(elec, "electricity"),),
        processes=tuple(processes),
        horizon=T,
        dt=1.0,
        demands={("demand", elec): _tup(sc_demand(T))},
        name=f"sc{scenario}",
    )


def heat_base_profile(horizon: int) -> np.ndarray:
    """Daily sinusoid between 0 and the heat peak, sampled at mid-step.

    Demand is lowest in the early morning and highest in the evening, so a
    day starts with surplus CHP heat and ends with the heating peak.
    """
    t = np.arange(horizon, dtype=float) + 0.5
    return HEAT_PEAK * (0.5 + 0.5 * np.cos(2 * np.pi * (t - HEAT_PEAK_HOUR) / MC_DAY))


def mc_pv_capacity(heat: np.ndarray, storage_capacity: float) -> float:
    """PV capacity letting the first day's surplus fill the heat storage.

    PV has to carry the whole day-1 heat demand through the heater, and the
    surplus after that, net of charging losses, must cover the storage
    capacity. Both requirements get the same relative margin.
    """
    day1 = heat[:MC_DAY]
    cover = day1.max()
    needed = (storage_capacity / HEAT_STORAGE_CHARGE_EFFICIENCY + day1.sum()) / MC_DAY
    return (1.0 + PV_MARGIN) * max(cover, needed)


def make_mc_system(scenario: int) -> EnergySystem:
    """Electricity/heat system with a gas CHP; see MC_DEMAND_SHARES for demand levels."""
    if scenario not in (1, 2, 3):
        raise ValueError(f"MC scenario must be 1, 2 or 3, got {scenario!r}")
    T = 2 * MC_DAY if scenario == 2 else MC_DAY
    elec_share, heat_share = MC_DEMAND_SHARES[scenario]
    heat = heat_share * heat_base_profile(T)
    elec = elec_share * ELEC_BASE * np.ones(T)

    processes = [
        Process("gas_import", ProcessKind.IMPORT, outputs=(Output("gas", cost=1.0, emission=GAS_CO2),)),
        Process("chp", ProcessKind.STANDARD, inputs=("gas",), outputs=(
            Output("elec", efficiency=CHP_ELEC_EFFICIENCY),
            Output("heat", efficiency=None,
                   efficiency_range=(0.0, CHP_TOTAL_EFFICIENCY - CHP_ELEC_EFFICIENCY)),
        )),
    ]
    if scenario in (1, 2):
        processes.append(Process("heater", ProcessKind.STANDARD, inputs=("elec",),
                                 outputs=(Output("heat", efficiency=1.0),)))
    if scenario == 2:
        avail = np.zeros(T)
        avail[:MC_DAY] = 1.0
        processes.append(Process("pv", ProcessKind.IMPORT, outputs=(Output(
            "elec", capacity=mc_pv_capacity(heat, MC_STORAGE_CAPACITY), availability=_tup(avail)),)))
    if scenario in (1, 2):
        processes.append(Process(
            "heat_storage", ProcessKind.STORAGE, inputs=("heat",), outputs=(Output("heat"),),
            storage=StorageParams(charge_efficiency=HEAT_STORAGE_CHARGE_EFFICIENCY,
                                  self_discharge=SELF_DISCHARGE,
                                  energy_capacity=MC_STORAGE_CAPACITY)))
    processes.append(Process("demand", ProcessKind.DEMAND, inputs=("elec", "heat")))
    return EnergySystem(
        commodities=(Commodity("gas", "natural gas"), Commodity("elec", "electricity"),
                     Commodity("heat", "heat")),
        processes=tuple(processes),
        horizon=T,
        dt=1.0,
        demands={("demand", "elec"): _tup(elec), ("demand", "heat"): _tup(heat)},
        name=f"mc{scenario}",
    )


BUILTIN = {
    "sc1": lambda: make_sc_system(1),
    "sc2": lambda: make_sc_system(2),
    "mc1": lambda: make_mc_system(1),
    "mc2": lambda: make_mc_system(2),
    "mc3": lambda: make_mc_system(3),
}


def builtin(name: str) -> EnergySystem:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValueError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTIN)}") from None


def _tup(a) -> tuple[float, ...]:
    return tuple(float(v) for v in a)
