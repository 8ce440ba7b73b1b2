"""Domain types for multi-modal energy systems.

Energies are in GWh per time step, powers in GW, emission factors in t/MWh,
variable costs in currency/MWh. Everything is immutable after construction.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

INF = math.inf


class ProcessKind(str, enum.Enum):
    STANDARD = "standard"
    STORAGE = "storage"
    IMPORT = "import"
    DEMAND = "demand"


@dataclass(frozen=True)
class Commodity:
    id: str
    name: str = ""


@dataclass(frozen=True)
class Output:
    """One output flow of a process.

    ``efficiency`` is the fixed output-per-input ratio of a standard process.
    Setting ``efficiency_range`` instead makes the output flexible between the
    two ratios. ``availability`` scales ``capacity`` per time step; ``None``
    means always fully available.
    """

    commodity: str
    efficiency: float | None = 1.0
    efficiency_range: tuple[float, float] | None = None
    capacity: float = INF
    cost: float = 0.0
    emission: float = 0.0
    availability: tuple[float, ...] | None = None

    @property
    def flexible(self) -> bool:
        return self.efficiency_range is not None


@dataclass(frozen=True)
class StorageParams:
    charge_efficiency: float = 1.0
    self_discharge: float = 0.0
    energy_capacity: float = INF
    initial_level: float = 0.0
    initial_co2: float = 0.0
    # Energy leaving the storage level per unit delivered is 1/discharge_efficiency.
    discharge_efficiency: float = 1.0


@dataclass(frozen=True)
class Process:
    id: str
    kind: ProcessKind
    inputs: tuple[str, ...] = ()
    outputs: tuple[Output, ...] = ()
    storage: StorageParams | None = None

    def output(self, commodity: str) -> Output:
        for out in self.outputs:
            if out.commodity == commodity:
                return out
        raise KeyError(f"process {self.id!r} has no output {commodity!r}")

    @property
    def output_commodities(self) -> tuple[str, ...]:
        return tuple(out.commodity for out in self.outputs)


@dataclass(frozen=True)
class EnergySystem:
    """Process graph plus time horizon and fixed demands.

    ``demands`` maps ``(demand process id, commodity id)`` to one energy value
    per time step.
    """

    commodities: tuple[Commodity, ...]
    processes: tuple[Process, ...]
    horizon: int
    dt: float = 1.0
    demands: Mapping[tuple[str, str], tuple[float, ...]] = field(default_factory=dict)
    name: str = ""

    def process(self, pid: str) -> Process:
        for p in self.processes:
            if p.id == pid:
                return p
        raise KeyError(pid)

    @property
    def commodity_ids(self) -> list[str]:
        return [c.id for c in self.commodities]

    def processes_of(self, kind: ProcessKind) -> list[Process]:
        return [p for p in self.processes if p.kind is kind]

    def producers(self, co: str) -> list[Process]:
        return [p for p in self.processes if co in p.output_commodities]

    def consumers(self, co: str) -> list[Process]:
        return [p for p in self.processes if co in p.inputs]

    def availability(self, pid: str, co: str) -> np.ndarray:
        out = self.process(pid).output(co)
        if out.availability is None:
            return np.ones(self.horizon)
        return np.asarray(out.availability, dtype=float)

    def demand_profile(self, pid: str, co: str) -> np.ndarray:
        prof = self.demands.get((pid, co))
        if prof is None:
            return np.zeros(self.horizon)
        return np.asarray(prof, dtype=float)

    def demand(self, co: str) -> np.ndarray:
        """Total demand for ``co`` per time step, summed over demand processes."""
        total = np.zeros(self.horizon)
        for p in self.processes_of(ProcessKind.DEMAND):
            if co in p.inputs:
                total += self.demand_profile(p.id, co)
        return total

    @property
    def demanded_commodities(self) -> list[str]:
        """Commodities consumed by some demand process, in commodity order."""
        wanted = {co for p in self.processes_of(ProcessKind.DEMAND) for co in p.inputs}
        return [co for co in self.commodity_ids if co in wanted]

    def with_demand(self, pid: str, co: str, profile) -> "EnergySystem":
        demands = dict(self.demands)
        demands[(pid, co)] = tuple(float(v) for v in profile)
        return EnergySystem(self.commodities, self.processes, self.horizon, self.dt, demands, self.name)


@dataclass(frozen=True)
class Violation:
    obj: str
    message: str

    def __str__(self) -> str:
        return f"{self.obj}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, obj: str, message: str) -> None:
        self.violations.append(Violation(obj, message))

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]

    def __str__(self) -> str:
        return "\n".join(str(v) for v in self.violations) or "ok"


class ValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__(str(report))
        self.report = report


def validate(system: EnergySystem) -> ValidationReport:
    """Check every structural invariant; an empty report means well-formed."""
    report = ValidationReport()
    ids = [c.id for c in system.commodities]
    known = set(ids)
    if len(known) != len(ids):
        report.add("commodities", "duplicate commodity id")
    pids = [p.id for p in system.processes]
    if len(set(pids)) != len(pids):
        report.add("processes", "duplicate process id")
    if system.horizon < 1:
        report.add("horizon", "horizon must be at least 1")
    if not system.dt > 0:
        report.add("horizon", "step length must be positive")

    for p in system.processes:
        refs = list(p.inputs) + [o.commodity for o in p.outputs]
        for co in refs:
            if co not in known:
                report.add(p.id, f"unknown commodity {co!r}")
        if len(set(p.inputs)) != len(p.inputs) or len(set(p.output_commodities)) != len(p.outputs):
            report.add(p.id, "commodity listed twice on one side")
        if p.kind is ProcessKind.IMPORT and p.inputs:
            report.add(p.id, "import has inputs")
        if p.kind is ProcessKind.DEMAND:
            if p.outputs:
                report.add(p.id, "demand has outputs")
            if not p.inputs:
                report.add(p.id, "demand has no inputs")
        if p.kind is ProcessKind.STANDARD and (not p.inputs or not p.outputs):
            report.add(p.id, "standard process needs inputs and outputs")
        if p.kind is ProcessKind.STORAGE:
            if len(p.inputs) != 1 or len(p.outputs) != 1:
                report.add(p.id, "storage needs exactly one input and one output commodity")
            if p.storage is None:
                report.add(p.id, "storage parameters missing")
            else:
                _check_storage(p, p.storage, report)
        elif p.storage is not None:
            report.add(p.id, "storage parameters on non-storage process")

        for out in p.outputs:
            _check_output(p, out, system.horizon, report)

    for (pid, co), prof in system.demands.items():
        if pid not in pids:
            report.add(pid, "demand profile for unknown process")
            continue
        p = system.process(pid)
        if p.kind is not ProcessKind.DEMAND:
            report.add(pid, "demand profile on non-demand process")
        if co not in p.inputs:
            report.add(pid, f"demand profile for {co!r} which is not an input")
        if len(prof) != system.horizon:
            report.add(pid, f"demand profile for {co!r} has wrong length")
        elif any(not math.isfinite(v) or v < 0 for v in prof):
            report.add(pid, f"demand for {co!r} must be finite and nonnegative")

    if report.ok:
        reachable = _reachable_commodities(system)
        for co in system.demanded_commodities:
            if co not in reachable:
                report.add(co, "demanded commodity has no producing path")
    return report


def _check_output(p: Process, out: Output, horizon: int, report: ValidationReport) -> None:
    where = f"{p.id}/{out.commodity}"
    if p.kind is ProcessKind.STANDARD:
        if out.efficiency_range is not None:
            lo, hi = out.efficiency_range
            if not 0 <= lo <= hi:
                report.add(where, "flexible efficiency range must satisfy 0 <= min <= max")
        elif out.efficiency is None or not out.efficiency > 0:
            report.add(where, "efficiency must be positive")
    elif out.efficiency_range is not None:
        report.add(where, "flexible outputs only allowed on standard processes")
    if not out.capacity >= 0:
        report.add(where, "capacity must be nonnegative")
    if not math.isfinite(out.cost) or not math.isfinite(out.emission):
        report.add(where, "cost and emission factor must be finite")
    if out.availability is not None:
        if len(out.availability) != horizon:
            report.add(where, "availability profile has wrong length")
        if any(not 0 <= a <= 1 for a in out.availability):
            report.add(where, "availability outside [0, 1]")


def _check_storage(p: Process, s: StorageParams, report: ValidationReport) -> None:
    if not 0 < s.charge_efficiency <= 1:
        report.add(p.id, "charge efficiency must lie in (0, 1]")
    if not 0 < s.discharge_efficiency <= 1:
        report.add(p.id, "discharge efficiency must lie in (0, 1]")
    if not 0 <= s.self_discharge < 1:
        report.add(p.id, "self-discharge must lie in [0, 1)")
    if not s.energy_capacity >= 0:
        report.add(p.id, "storage capacity must be nonnegative")
    if not 0 <= s.initial_level <= s.energy_capacity:
        report.add(p.id, "initial level outside [0, capacity]")
    if not s.initial_co2 >= 0:
        report.add(p.id, "initial stored CO2 must be nonnegative")


def _reachable_commodities(system: EnergySystem) -> set[str]:
    """Commodities producible from imports (or initially filled storage)."""
    reachable: set[str] = set()
    queue: deque[str] = deque()
    for p in system.processes:
        seeded = p.kind is ProcessKind.IMPORT or (
            p.kind is ProcessKind.STORAGE and p.storage is not None and p.storage.initial_level > 0
        )
        if seeded:
            for co in p.output_commodities:
                if co not in reachable:
                    reachable.add(co)
                    queue.append(co)
    while queue:
        queue.popleft()
        for p in system.processes:
            if p.kind not in (ProcessKind.STANDARD, ProcessKind.STORAGE):
                continue
            if all(co in reachable for co in p.inputs):
                for co in p.output_commodities:
                    if co not in reachable:
                        reachable.add(co)
                        queue.append(co)
    return reachable


def max_producible(system: EnergySystem, co: str) -> float:
    """Upper bound on the energy of ``co`` producible over the horizon.

    Sums availability times capacity over every import and conversion
    producer; an uncapped producer makes the bound infinite.
    """
    total = 0.0
    for p in system.producers(co):
        out = p.output(co)
        if p.kind is ProcessKind.STORAGE:
            # storage only shifts energy; net release is bounded by its start level
            total += p.storage.initial_level if p.storage else 0.0
            continue
        if math.isinf(out.capacity):
            return INF
        total += float(np.sum(system.availability(p.id, co))) * out.capacity * system.dt
    return total
