"""Economic dispatch LP for an :class:`EnergySystem`.

Column tags::

    ("E_out", process, commodity, t)   energy produced [GWh]
    ("E_in", commodity, process, t)    energy consumed [GWh]
    ("SL", process, t)                 storage level at the end of step t [GWh]
    ("M_tot",)                         total CO2 [t]

Row tags are ``(kind, ...)`` tuples; the kinds are EnergyBalance, ProcessBalance,
ProcessMin, ProcessMax, Capacity, NonNeg, DemandFix, StorageBalance,
StorageCap and CO2Balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpcore
from .model import EnergySystem, ProcessKind, ValidationError, validate

MWH_PER_GWH = 1000.0
COST_PERTURBATION = 1e-9
DEMAND_TILT = 1e-6


class InfeasibleSystem(RuntimeError):
    pass


class UnboundedModel(RuntimeError):
    pass


@dataclass
class DispatchResult:
    e_out: dict[tuple[str, str], np.ndarray]
    e_in: dict[tuple[str, str], np.ndarray]
    sl: dict[str, np.ndarray]
    m_tot: float
    cost: float
    lp: lpcore.StandardFormLP
    sol: lpcore.LPSolution
    row_index: dict
    col_index: dict
    meta: dict = field(default_factory=dict)

    def production(self, co: str) -> np.ndarray:
        return sum((v for (cp, c), v in self.e_out.items() if c == co), np.zeros(self.horizon))

    def consumption(self, co: str) -> np.ndarray:
        return sum((v for (c, cp), v in self.e_in.items() if c == co), np.zeros(self.horizon))

    @property
    def horizon(self) -> int:
        return len(next(iter(self.e_out.values())))


def build_lp(system: EnergySystem, *, perturb: bool = True) -> lpcore.StandardFormLP:
    """Assemble the dispatch LP.

    With ``perturb`` every column cost is nudged by a tiny, index-keyed
    amount so that equal-cost dispatches are resolved deterministically:
    flows become slightly more expensive the more of them there is, storage
    levels slightly cheaper, so free surplus is stored rather than discarded.
    """
    report = validate(system)
    if not report.ok:
        raise ValidationError(report)

    T, dt = system.horizon, system.dt
    bld = lpcore.LPBuilder()
    flows_out: dict = {}
    flows_in: dict = {}

    for p in system.processes:
        for out in p.outputs:
            for t in range(T):
                j = bld.add_col(("E_out", p.id, out.commodity, t), out.cost)
                flows_out.setdefault(out.commodity, {}).setdefault(t, []).append(j)
        for co in p.inputs:
            for t in range(T):
                j = bld.add_col(("E_in", co, p.id, t))
                flows_in.setdefault(co, {}).setdefault(t, []).append(j)
        if p.kind is ProcessKind.STORAGE:
            for t in range(T):
                bld.add_col(("SL", p.id, t))
    m_tot = bld.add_col(("M_tot",))

    for co in system.commodity_ids:
        for t in range(T):
            coeffs = [(j, 1.0) for j in flows_out.get(co, {}).get(t, [])]
            coeffs += [(j, -1.0) for j in flows_in.get(co, {}).get(t, [])]
            bld.add_row(("EnergyBalance", co, t), coeffs, 0.0, eq=True)

    for p in system.processes:
        if p.kind is ProcessKind.STANDARD:
            for out in p.outputs:
                for t in range(T):
                    jo = bld.col(("E_out", p.id, out.commodity, t))
                    ins = [bld.col(("E_in", co, p.id, t)) for co in p.inputs]
                    if out.flexible:
                        kmin, kmax = out.efficiency_range
                        bld.add_row(("ProcessMin", p.id, out.commodity, t),
                                    [(jo, -1.0)] + [(j, kmin) for j in ins], 0.0)
                        bld.add_row(("ProcessMax", p.id, out.commodity, t),
                                    [(jo, 1.0)] + [(j, -kmax) for j in ins], 0.0)
                    else:
                        bld.add_row(("ProcessBalance", p.id, out.commodity, t),
                                    [(jo, 1.0)] + [(j, -out.efficiency) for j in ins], 0.0, eq=True)
        elif p.kind is ProcessKind.DEMAND:
            for co in p.inputs:
                prof = system.demand_profile(p.id, co)
                for t in range(T):
                    bld.add_row(("DemandFix", p.id, co, t), [(bld.col(("E_in", co, p.id, t)), 1.0)],
                                float(prof[t]), eq=True)
        elif p.kind is ProcessKind.STORAGE:
            s = p.storage
            keep = (1.0 - s.self_discharge) ** dt
            for t in range(T):
                coeffs = [(bld.col(("SL", p.id, t)), 1.0)]
                if t > 0:
                    coeffs.append((bld.col(("SL", p.id, t - 1)), -keep))
                coeffs += [(bld.col(("E_in", co, p.id, t)), -s.charge_efficiency) for co in p.inputs]
                coeffs += [(bld.col(("E_out", p.id, o.commodity, t)), 1.0 / s.discharge_efficiency)
                           for o in p.outputs]
                rhs = keep * s.initial_level if t == 0 else 0.0
                bld.add_row(("StorageBalance", p.id, t), coeffs, rhs, eq=True)
                j_sl = bld.col(("SL", p.id, t))
                if math.isfinite(s.energy_capacity):
                    bld.add_row(("StorageCap", p.id, t), [(j_sl, 1.0)], s.energy_capacity)
                bld.add_row(("NonNeg", "SL", p.id, t), [(j_sl, -1.0)], 0.0)

        for out in p.outputs:
            avail = system.availability(p.id, out.commodity)
            for t in range(T):
                jo = bld.col(("E_out", p.id, out.commodity, t))
                if math.isfinite(out.capacity):
                    bld.add_row(("Capacity", p.id, out.commodity, t), [(jo, 1.0)],
                                avail[t] * out.capacity * dt)
                bld.add_row(("NonNeg", "E_out", p.id, out.commodity, t), [(jo, -1.0)], 0.0)
        if p.kind is not ProcessKind.DEMAND:
            for co in p.inputs:
                for t in range(T):
                    bld.add_row(("NonNeg", "E_in", co, p.id, t),
                                [(bld.col(("E_in", co, p.id, t)), -1.0)], 0.0)

    coeffs = [(m_tot, 1.0)]
    for p in system.processes:
        for out in p.outputs:
            if out.emission:
                coeffs += [(bld.col(("E_out", p.id, out.commodity, t)), -MWH_PER_GWH * out.emission)
                           for t in range(T)]
    bld.add_row(("CO2Balance",), coeffs, 0.0, eq=True)

    lp = bld.build()
    if perturb:
        lp.c = lp.c + cost_perturbation(lp)
    return lp


def cost_perturbation(lp: lpcore.StandardFormLP) -> np.ndarray:
    n = lp.n_cols
    scale = COST_PERTURBATION * max(1.0, float(np.max(np.abs(lp.c), initial=0.0)))
    ramp = scale * (1.0 + np.arange(n) / max(n, 1))
    sign = np.array([-1.0 if tag[0] == "SL" else (0.0 if tag[0] == "M_tot" else 1.0)
                     for tag in lp.col_tags])
    return sign * ramp


def demand_tilt(lp: lpcore.StandardFormLP) -> np.ndarray:
    """Tiny demand increase on every demand row, for basis selection."""
    demand_rows = np.array([tag[0] == "DemandFix" for tag in lp.row_tags])
    scale = max(1.0, float(np.max(np.abs(lp.b[demand_rows]), initial=0.0)))
    return DEMAND_TILT * scale * demand_rows


def solve_dispatch(system: EnergySystem, *, perturb: bool = True) -> DispatchResult:
    """Cost-optimal operation of ``system`` with all flows and storage levels.

    Where the optimal dispatch is degenerate (e.g. a unit idling exactly at
    zero), the returned basis is the one that remains optimal when demands
    grow, which is the side what-if analysis differentiates along.
    """
    lp = build_lp(system, perturb=perturb)
    sol = lpcore.solve(lp, rhs_tilt=demand_tilt(lp))
    if sol.status is lpcore.Status.INFEASIBLE:
        raise InfeasibleSystem(f"dispatch of {system.name or 'system'} is infeasible")
    if sol.status is lpcore.Status.UNBOUNDED:
        raise UnboundedModel(f"dispatch of {system.name or 'system'} is unbounded")
    return _unpack(system, lp, sol, perturb)


def _unpack(system, lp, sol, perturb) -> DispatchResult:
    T = system.horizon
    x = sol.x
    col_index = {tag: j for j, tag in enumerate(lp.col_tags)}
    row_index = {tag: i for i, tag in enumerate(lp.row_tags)}
    e_out, e_in, sl = {}, {}, {}
    for p in system.processes:
        for out in p.outputs:
            e_out[(p.id, out.commodity)] = np.array(
                [x[col_index[("E_out", p.id, out.commodity, t)]] for t in range(T)])
        for co in p.inputs:
            e_in[(co, p.id)] = np.array([x[col_index[("E_in", co, p.id, t)]] for t in range(T)])
        if p.kind is ProcessKind.STORAGE:
            sl[p.id] = np.array([x[col_index[("SL", p.id, t)]] for t in range(T)])
    cost = MWH_PER_GWH * sum(
        float(p.output(co).cost * np.sum(v)) for (pid, co), v in e_out.items()
        for p in [system.process(pid)])
    meta = {
        "perturbed": perturb,
        "perturbation_scale": COST_PERTURBATION if perturb else 0.0,
        "iterations": sol.iterations,
        "n_rows": lp.n_rows,
        "n_cols": lp.n_cols,
    }
    return DispatchResult(e_out, e_in, sl, float(x[col_index[("M_tot",)]]), cost,
                          lp, sol, row_index, col_index, meta)
