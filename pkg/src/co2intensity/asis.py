"""As-is CO2 intensities by tracing attributable CO2 through every flow.

All processes and time steps are coupled in one sparse linear system, which
resolves circular dependencies between commodities (e.g. power-to-gas feeding
a gas plant) and carries stored CO2 across time. Unknowns:

* ``I(co, t)``        commodity intensity [t/MWh]
* ``I_stor(cp, t)``   intensity of a storage's content at the end of step t
* ``M_in(cp, t)``     CO2 entering a process with its inputs [t]
* ``M_out(cp, co, t)`` CO2 leaving a process with one output [t]
* ``M_stor(cp, t)``   CO2 attributed to the storage content [t]

Where an energy denominator drops below ``eps`` the defining ratio is
replaced by a pinning rule and the entry is flagged as thresholded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dispatch import MWH_PER_GWH as U
from .model import EnergySystem, ProcessKind

EPS = 1e-6  # GWh


class SingularTraceSystem(np.linalg.LinAlgError):
    pass


@dataclass
class Flows:
    """Observed (or optimized) energy flows; a :class:`DispatchResult` also fits."""

    e_out: dict[tuple[str, str], np.ndarray]
    e_in: dict[tuple[str, str], np.ndarray]
    sl: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class TraceSystem:
    A: sp.csr_matrix
    rhs: np.ndarray
    unknowns: list
    equations: list
    thresholded: set
    index: dict

    def residual(self, z: np.ndarray) -> np.ndarray:
        return self.A @ z - self.rhs


@dataclass
class AsIsResult:
    intensity: dict[str, np.ndarray]
    storage_intensity: dict[str, np.ndarray]
    m_in: dict[str, np.ndarray]
    m_out: dict[tuple[str, str], np.ndarray]
    m_stor: dict[str, np.ndarray]
    thresholded: set
    max_residual: float
    process_emissions: float = 0.0   # CO2 emitted by conversion processes themselves [t]
    conservation_residual: float = float("nan")

    def co2_balance(self, system: EnergySystem) -> tuple[float, float]:
        """(CO2 entering the system, CO2 at demands plus terminal storage) in t."""
        source = 0.0
        for p in system.processes:
            if p.kind is ProcessKind.IMPORT:
                source += sum(float(np.sum(self.m_out[(p.id, co)])) for co in p.output_commodities)
            elif p.kind is ProcessKind.STORAGE:
                source += p.storage.initial_co2
        source += self.process_emissions
        sink = sum(float(np.sum(self.m_in[p.id])) for p in system.processes_of(ProcessKind.DEMAND))
        sink += sum(float(v[-1]) for v in self.m_stor.values())
        return source, sink


def _clean(flows) -> tuple[dict, dict, dict]:
    e_out = {k: np.maximum(np.asarray(v, float), 0.0) for k, v in flows.e_out.items()}
    e_in = {k: np.maximum(np.asarray(v, float), 0.0) for k, v in flows.e_in.items()}
    sl = {k: np.maximum(np.asarray(v, float), 0.0) for k, v in getattr(flows, "sl", {}).items()}
    return e_out, e_in, sl


def _initial_storage_intensity(s, eps) -> float:
    return s.initial_co2 / (U * s.initial_level) if s.initial_level > eps else 0.0


def build_asis_system(system: EnergySystem, flows, eps: float = EPS) -> TraceSystem:
    """Assemble the coupled CO2 tracing equations for all steps at once."""
    T = system.horizon
    e_out, e_in, sl = _clean(flows)
    zeros = np.zeros(T)

    unknowns: list = []
    index: dict = {}

    def var(tag):
        index[tag] = len(unknowns)
        unknowns.append(tag)

    for co in system.commodity_ids:
        for t in range(T):
            var(("I", co, t))
    for p in system.processes:
        if p.kind is not ProcessKind.IMPORT:
            for t in range(T):
                var(("M_in", p.id, t))
        for co in p.output_commodities:
            for t in range(T):
                var(("M_out", p.id, co, t))
        if p.kind is ProcessKind.STORAGE:
            for t in range(T):
                var(("I_stor", p.id, t))
                var(("M_stor", p.id, t))

    rows, cols, vals, rhs, equations = [], [], [], [], []
    thresholded: set = set()

    def eq(tag, coeffs, b=0.0):
        i = len(rhs)
        for name, a in coeffs:
            if a != 0.0:
                rows.append(i)
                cols.append(index[name])
                vals.append(a)
        rhs.append(b)
        equations.append(tag)

    # commodity intensities: I * production = sum of CO2 outflows
    for co in system.commodity_ids:
        producers = [p for p in system.producers(co)]
        for t in range(T):
            prod = sum(e_out[(p.id, co)][t] for p in producers)
            if prod >= eps:
                eq(("intensity", co, t), [(("I", co, t), U * prod)]
                   + [(("M_out", p.id, co, t), -1.0) for p in producers])
            else:
                eq(("intensity-pinned", co, t), [(("I", co, t), 1.0)])
                thresholded.add(("commodity", co, t))

    for p in system.processes:
        if p.kind is not ProcessKind.IMPORT:
            for t in range(T):
                eq(("inflow", p.id, t), [(("M_in", p.id, t), 1.0)]
                   + [(("I", co, t), -U * e_in[(co, p.id)][t]) for co in p.inputs])

        if p.kind is ProcessKind.IMPORT:
            for out in p.outputs:
                for t in range(T):
                    eq(("import", p.id, out.commodity, t), [(("M_out", p.id, out.commodity, t), 1.0)],
                       U * out.emission * e_out[(p.id, out.commodity)][t])

        elif p.kind is ProcessKind.STANDARD:
            for t in range(T):
                total = sum(e_out[(p.id, o.commodity)][t] for o in p.outputs)
                pinned = total < eps
                if pinned:
                    thresholded.add(("process", p.id, t))
                for out in p.outputs:
                    e = e_out[(p.id, out.commodity)][t]
                    share = 1.0 / len(p.outputs) if pinned else e / total
                    eq(("split", p.id, out.commodity, t),
                       [(("M_out", p.id, out.commodity, t), 1.0), (("M_in", p.id, t), -share)],
                       U * out.emission * e)

        elif p.kind is ProcessKind.STORAGE:
            s = p.storage
            I0 = _initial_storage_intensity(s, eps)
            out = p.outputs[0]
            level = sl.get(p.id, zeros)
            for t in range(T):
                e = e_out[(p.id, out.commodity)][t]
                withdrawn = U * e / s.discharge_efficiency
                coeffs = [(("M_out", p.id, out.commodity, t), 1.0)]
                b = U * out.emission * e
                if t == 0:
                    b += withdrawn * I0
                else:
                    coeffs.append((("I_stor", p.id, t - 1), -withdrawn))
                eq(("discharge", p.id, t), coeffs, b)

                coeffs = [(("M_stor", p.id, t), 1.0), (("M_in", p.id, t), -1.0),
                          (("M_out", p.id, out.commodity, t), 1.0)]
                if t == 0:
                    eq(("stored", p.id, t), coeffs, s.initial_co2)
                else:
                    eq(("stored", p.id, t), coeffs + [(("M_stor", p.id, t - 1), -1.0)])

                if level[t] >= eps:
                    eq(("storage-intensity", p.id, t),
                       [(("I_stor", p.id, t), U * level[t]), (("M_stor", p.id, t), -1.0)])
                else:
                    thresholded.add(("storage", p.id, t))
                    if t == 0:
                        eq(("storage-intensity-pinned", p.id, t), [(("I_stor", p.id, t), 1.0)], I0)
                    else:
                        eq(("storage-intensity-pinned", p.id, t),
                           [(("I_stor", p.id, t), 1.0), (("I_stor", p.id, t - 1), -1.0)])

    n = len(unknowns)
    if len(rhs) != n:
        raise SingularTraceSystem(f"{len(rhs)} equations for {n} unknowns")
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return TraceSystem(A, np.asarray(rhs, float), unknowns, equations, thresholded, index)


def solve_trace(trace: TraceSystem) -> tuple[np.ndarray, float]:
    try:
        lu = spla.splu(trace.A.tocsc())
    except RuntimeError as exc:
        raise SingularTraceSystem(str(exc)) from exc
    z = lu.solve(trace.rhs)
    if not np.all(np.isfinite(z)):
        raise SingularTraceSystem("trace system has no finite solution")
    scale = max(1.0, float(np.max(np.abs(trace.rhs), initial=0.0)),
                float(np.max(abs(trace.A) @ np.abs(z), initial=0.0)))
    return z, float(np.max(np.abs(trace.residual(z)), initial=0.0)) / scale


def compute_asis(system: EnergySystem, flows, eps: float = EPS) -> AsIsResult:
    """Solve the tracing system and collect intensities and CO2 flows."""
    trace = build_asis_system(system, flows, eps)
    z, resid = solve_trace(trace)
    T = system.horizon
    ix = trace.index

    def series(*key):
        return np.array([z[ix[key + (t,)]] for t in range(T)])

    intensity = {co: series("I", co) for co in system.commodity_ids}
    storage_intensity, m_stor, m_in, m_out = {}, {}, {}, {}
    for p in system.processes:
        if p.kind is not ProcessKind.IMPORT:
            m_in[p.id] = series("M_in", p.id)
        for co in p.output_commodities:
            m_out[(p.id, co)] = series("M_out", p.id, co)
        if p.kind is ProcessKind.STORAGE:
            storage_intensity[p.id] = series("I_stor", p.id)
            m_stor[p.id] = series("M_stor", p.id)

    e_out, _, _ = _clean(flows)
    emitted = sum(U * out.emission * float(np.sum(e_out[(p.id, out.commodity)]))
                  for p in system.processes if p.kind is not ProcessKind.IMPORT
                  for out in p.outputs)
    result = AsIsResult(intensity, storage_intensity, m_in, m_out, m_stor,
                        trace.thresholded, resid, emitted)
    source, sink = result.co2_balance(system)
    result.conservation_residual = abs(source - sink) / max(1.0, abs(source))
    return result
