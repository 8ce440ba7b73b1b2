"""Random system and LP generators shared by property tests."""

from __future__ import annotations

import itertools

import numpy as np

from co2intensity.lp import StandardFormLP
from co2intensity.model import (Commodity, EnergySystem, Output, Process, ProcessKind,
                                StorageParams)


def random_system(rng: np.random.Generator, *, max_commodities: int = 3, max_processes: int = 5,
                  max_horizon: int = 8) -> EnergySystem:
    """A small feasible system: every demanded commodity has an uncapped supply chain.

    Commodity 0 has an uncapped import; every further commodity gets either
    its own import or a converter from an earlier commodity. Leftover process
    slots go to a storage, a capped zero-emission import, or a converter
    back to commodity 0 (which closes a cycle).
    """
    k = int(rng.integers(1, max_commodities + 1))
    T = int(rng.integers(1, max_horizon + 1))
    cids = [f"c{i}" for i in range(k)]
    procs = [Process("imp0", ProcessKind.IMPORT, outputs=(Output(
        "c0", cost=float(rng.uniform(1, 10)), emission=float(rng.uniform(0, 1))),))]
    for i in range(1, k):
        if rng.random() < 0.3:
            procs.append(Process(f"imp{i}", ProcessKind.IMPORT, outputs=(Output(
                cids[i], cost=float(rng.uniform(1, 10)), emission=float(rng.uniform(0, 1))),)))
        else:
            src = cids[int(rng.integers(0, i))]
            outs = [Output(cids[i], efficiency=float(rng.uniform(0.3, 1.0)), cost=float(rng.uniform(0, 2)),
                           emission=float(rng.uniform(0, 0.2)) if rng.random() < 0.3 else 0.0)]
            others = [c for c in cids if c not in (cids[i], src)]
            if others and rng.random() < 0.5:
                hi = float(rng.uniform(0.1, 0.6))
                outs.append(Output(others[0], efficiency=None, efficiency_range=(0.0, hi)))
            procs.append(Process(f"conv{i}", ProcessKind.STANDARD, inputs=(src,), outputs=tuple(outs)))

    extras = ["storage", "renewable", "cycle"]
    while len(procs) < max_processes - 1 and rng.random() < 0.7:
        kind = extras[int(rng.integers(0, len(extras)))]
        co = cids[int(rng.integers(0, k))]
        n = len(procs)
        if kind == "storage":
            cap = float(rng.uniform(0.5, 3))
            level = float(rng.uniform(0, cap))
            procs.append(Process(f"stor{n}", ProcessKind.STORAGE, inputs=(co,), outputs=(Output(co),),
                                 storage=StorageParams(
                                     charge_efficiency=float(rng.uniform(0.7, 1)),
                                     self_discharge=float(rng.uniform(0, 0.05)),
                                     energy_capacity=cap, initial_level=level,
                                     initial_co2=float(rng.uniform(0, 1000 * level)),
                                     discharge_efficiency=float(rng.uniform(0.8, 1)))))
        elif kind == "renewable":
            avail = tuple(float(a) for a in rng.uniform(0, 1, T))
            procs.append(Process(f"ren{n}", ProcessKind.IMPORT, outputs=(Output(
                co, capacity=float(rng.uniform(0.1, 2)), availability=avail),)))
        elif k > 1 and co != "c0":
            procs.append(Process(f"back{n}", ProcessKind.STANDARD, inputs=(co,), outputs=(Output(
                "c0", efficiency=float(rng.uniform(0.2, 0.9)), cost=float(rng.uniform(0, 1))),)))

    wanted = [c for c in cids if rng.random() < 0.7] or [cids[-1]]
    procs.append(Process("demand", ProcessKind.DEMAND, inputs=tuple(wanted)))
    demands = {("demand", c): tuple(float(v) for v in rng.uniform(0, 2, T)) for c in wanted}
    return EnergySystem(tuple(Commodity(c) for c in cids), tuple(procs), T, 1.0, demands, "random")


def random_bounded_lp(rng: np.random.Generator, n: int, m: int, *, eq: int = 0) -> StandardFormLP:
    """Feasible LP with ``m`` random rows (``eq`` of them equalities) plus a box."""
    x0 = rng.uniform(-1, 1, n)
    A = rng.normal(size=(m, n))
    slack = rng.uniform(0, 1, m) * (rng.random(m) < 0.7)
    b = A @ x0 + slack
    b[:eq] = A[:eq] @ x0
    box = np.vstack([np.eye(n), -np.eye(n)])
    ub = rng.uniform(1, 3, n)
    lb = rng.uniform(1, 3, n)
    A_all = np.vstack([A[eq:], box])
    b_all = np.concatenate([b[eq:], ub, lb])
    c = rng.normal(size=n)
    return StandardFormLP.from_dense(c, A_all, b_all, A[:eq] if eq else None, b[:eq] if eq else None)


def vertex_enumeration(lp: StandardFormLP, tol: float = 1e-9) -> float:
    """Optimal objective of a bounded LP by trying every basic solution."""
    A = lp.A.toarray()
    n = lp.n_cols
    eq = np.flatnonzero(lp.is_eq)
    ineq = np.flatnonzero(~lp.is_eq)
    k = n - len(eq)
    combos = (np.array(list(itertools.combinations(ineq, k)), dtype=int).reshape(-1, k) if k
              else np.zeros((1, 0), dtype=int))
    idx = np.hstack([np.broadcast_to(eq, (len(combos), len(eq))), combos])
    M = A[idx]                                   # (K, n, n)
    ok = np.abs(np.linalg.det(M)) > 1e-12
    X = np.linalg.solve(M[ok], lp.b[idx[ok]][..., None])[..., 0]
    scale = 1.0 + np.abs(lp.b)
    feasible = np.all(X @ A[ineq].T <= lp.b[ineq] + tol * scale[ineq], axis=1)
    if len(eq):
        feasible &= np.all(np.abs(X @ A[eq].T - lp.b[eq]) <= tol * scale[eq], axis=1)
    return float(np.min(X[feasible] @ lp.c)) if np.any(feasible) else np.inf


def power_to_gas_system() -> EnergySystem:
    """Electricity and gas coupled both ways: a gas plant and power-to-gas.

    PV surplus at midday is converted to gas, which the gas plant burns at
    night, so the CO2 content of each commodity depends on the other.
    """
    T = 6
    pv = (0.0, 0.0, 1.0, 1.0, 0.0, 0.0)
    procs = (
        Process("gas_import", ProcessKind.IMPORT, outputs=(Output("gas", cost=20.0, emission=0.2),)),
        Process("pv", ProcessKind.IMPORT, outputs=(Output("elec", capacity=3.0, availability=pv),)),
        Process("gas_plant", ProcessKind.STANDARD, inputs=("gas",),
                outputs=(Output("elec", efficiency=0.5, cost=1.0),)),
        Process("p2g", ProcessKind.STANDARD, inputs=("elec",),
                outputs=(Output("gas", efficiency=0.6, cost=1.0),)),
        Process("demand", ProcessKind.DEMAND, inputs=("elec", "gas")),
    )
    demands = {("demand", "elec"): (1.0,) * T, ("demand", "gas"): (0.5,) * T}
    return EnergySystem((Commodity("elec"), Commodity("gas")), procs, T, 1.0, demands, "p2g")
