"""Scenario files and result tables.

A scenario is a TOML document::

    name = "sc2"

    [horizon]
    steps = 24
    dt = 1.0

    [commodities]
    elec = "electricity"

    [processes.spp]
    kind = "import"
    outputs = [{ commodity = "elec", capacity = 0.75, cost = 30.0, emission = 0.911 }]

    [processes.storage]
    kind = "storage"
    inputs = ["elec"]
    outputs = [{ commodity = "elec" }]
    storage = { charge_efficiency = 1.0, self_discharge = 0.01, energy_capacity = 6.0 }

    [processes.demand]
    kind = "demand"
    inputs = ["elec"]

    [profiles]
    load = [0.15, 0.3, ...]                          # inline, one value per step
    sun = { csv = "sun.csv", column = "availability" }   # CSV column, one row per step

    [demands.demand]
    elec = "load"

Output availability and demands refer to profiles by name or give the series
inline. Units are fixed: GW, GWh, hours, t/MWh. Unknown keys are errors.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from .model import (Commodity, EnergySystem, Output, Process, ProcessKind, StorageParams,
                    ValidationError, validate)

SCENARIO_SUFFIX = ".scenario"
FLAGS = ("ok", "thresholded", "degenerate")
CSV_HEADER = ("scenario", "series", "t", "value", "unit", "flag")

_TOP_KEYS = {"name", "horizon", "commodities", "processes", "profiles", "demands"}
_HORIZON_KEYS = {"steps", "dt"}
_PROCESS_KEYS = {"kind", "inputs", "outputs", "storage"}
_OUTPUT_KEYS = {f.name for f in fields(Output)}
_STORAGE_KEYS = {f.name for f in fields(StorageParams)}


class ParseError(ValueError):
    def __init__(self, message: str, *, path=None, section: str | None = None, line: int | None = None):
        self.message, self.path, self.section, self.line = message, path, section, line
        where = str(path) if path else "<scenario>"
        if line is not None:
            where += f":{line}"
        if section:
            where += f" [{section}]"
        super().__init__(f"{where}: {message}")


class _Reader:
    """Turns the decoded TOML tree into model objects, with error locations."""

    def __init__(self, text: str, path: Path | None):
        self.lines = text.splitlines()
        self.path = path
        self.base = path.parent if path else Path.cwd()
        self.profiles: dict[str, tuple[float, ...]] = {}
        self.horizon = 0

    def fail(self, message: str, section: str | None = None, key: str | None = None):
        raise ParseError(message, path=self.path, section=section, line=self._locate(section, key))

    def _locate(self, section: str | None, key: str | None) -> int | None:
        """Best-effort line number of ``key`` (or the header) within ``section``."""
        start = 0
        if section:
            parts = section.split(".")
            header = re.compile(r"^\s*\[+\s*" + r"\s*\.\s*".join(
                rf'"?{re.escape(p)}"?' for p in parts) + r"\s*\]+")
            for i, ln in enumerate(self.lines):
                if header.match(ln):
                    start = i
                    break
            else:
                # section may be an inline table; look for its last key
                key = key or parts[-1]
        if key is None:
            return start + 1 if section else None
        pattern = re.compile(rf'^\s*"?{re.escape(key)}"?\s*=')
        for i in range(start, len(self.lines)):
            if pattern.match(self.lines[i]) or re.search(rf'\b{re.escape(key)}\s*=', self.lines[i]):
                return i + 1
        return start + 1 if section else None

    def check_keys(self, table: dict, allowed: set, section: str | None):
        if not isinstance(table, dict):
            self.fail("expected a table", section)
        for k in table:
            if k not in allowed:
                self.fail(f"unknown key {k!r}", section, k)

    def number(self, value, section, key) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{key} must be a number", section, key)
        return float(value)

    # profiles ---------------------------------------------------------------
    def read_profiles(self, table: dict):
        for name, spec in table.items():
            section = "profiles"
            if isinstance(spec, list):
                self.profiles[name] = self.series(spec, section, name)
            elif isinstance(spec, dict):
                self.check_keys(spec, {"csv", "column"}, f"profiles.{name}")
                if "csv" not in spec:
                    self.fail(f"profile {name!r} needs a 'csv' file", section, name)
                self.profiles[name] = self.csv_column(name, spec["csv"], spec.get("column", name))
            else:
                self.fail(f"profile {name!r} must be a list or a csv reference", section, name)

    def csv_column(self, name: str, ref: str, column: str) -> tuple[float, ...]:
        file = (self.base / ref)
        if not file.is_file():
            self.fail(f"profile {name!r}: csv file {ref!r} not found", "profiles", name)
        with file.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if column not in (reader.fieldnames or []):
                self.fail(f"profile {name!r}: column {column!r} missing in {ref!r}", "profiles", name)
            try:
                values = [float(row[column]) for row in reader]
            except (TypeError, ValueError):
                self.fail(f"profile {name!r}: non-numeric entry in {ref!r}", "profiles", name)
        return self.series(values, "profiles", name)

    def series(self, values, section, key) -> tuple[float, ...]:
        out = tuple(self.number(v, section, key) for v in values)
        if len(out) != self.horizon:
            self.fail(f"{key} has {len(out)} values, horizon is {self.horizon}", section, key)
        return out

    def profile(self, ref, section, key) -> tuple[float, ...]:
        if isinstance(ref, str):
            if ref not in self.profiles:
                self.fail(f"unknown profile {ref!r}", section, key)
            return self.profiles[ref]
        if isinstance(ref, list):
            return self.series(ref, section, key)
        self.fail(f"{key} must name a profile or list values", section, key)

    # processes --------------------------------------------------------------
    def output(self, spec: dict, section: str) -> Output:
        self.check_keys(spec, _OUTPUT_KEYS, section)
        if "commodity" not in spec:
            self.fail("output needs a commodity", section)
        kw = {"commodity": str(spec["commodity"])}
        for k in ("capacity", "cost", "emission"):
            if k in spec:
                kw[k] = self.number(spec[k], section, k)
        if "efficiency" in spec:
            kw["efficiency"] = self.number(spec["efficiency"], section, "efficiency")
        if "efficiency_range" in spec:
            rng = spec["efficiency_range"]
            if not isinstance(rng, list) or len(rng) != 2:
                self.fail("efficiency_range must be [min, max]", section, "efficiency_range")
            kw["efficiency_range"] = tuple(self.number(v, section, "efficiency_range") for v in rng)
            kw.setdefault("efficiency", None)
        if "availability" in spec:
            kw["availability"] = self.profile(spec["availability"], section, "availability")
        return Output(**kw)

    def process(self, pid: str, spec: dict) -> Process:
        section = f"processes.{pid}"
        self.check_keys(spec, _PROCESS_KEYS, section)
        try:
            kind = ProcessKind(spec.get("kind"))
        except ValueError:
            self.fail(f"kind must be one of {[k.value for k in ProcessKind]}", section, "kind")
        inputs = spec.get("inputs", [])
        if not isinstance(inputs, list) or not all(isinstance(c, str) for c in inputs):
            self.fail("inputs must be a list of commodity ids", section, "inputs")
        outputs = spec.get("outputs", [])
        if not isinstance(outputs, list):
            self.fail("outputs must be a list of tables", section, "outputs")
        outs = tuple(self.output(o, f"{section}.outputs") for o in outputs)
        storage = None
        if "storage" in spec:
            st = spec["storage"]
            self.check_keys(st, _STORAGE_KEYS, f"{section}.storage")
            storage = StorageParams(**{k: self.number(v, f"{section}.storage", k) for k, v in st.items()})
        return Process(pid, kind, tuple(inputs), outs, storage)


def parse_scenario(text: str, path: Path | str | None = None) -> EnergySystem:
    """Parse scenario ``text``; relative CSV references resolve against ``path``."""
    path = Path(path) if path is not None else None
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(exc), path=path, line=int(m.group(1)) if m else None) from None

    rd = _Reader(text, path)
    rd.check_keys(doc, _TOP_KEYS, None)
    for key in ("horizon", "commodities", "processes"):
        if key not in doc:
            rd.fail(f"missing section [{key}]")
    hz = doc["horizon"]
    rd.check_keys(hz, _HORIZON_KEYS, "horizon")
    steps = hz.get("steps")
    if isinstance(steps, bool) or not isinstance(steps, int):
        rd.fail("steps must be an integer", "horizon", "steps")
    rd.horizon = steps
    dt = rd.number(hz.get("dt", 1.0), "horizon", "dt")

    commodities = doc["commodities"]
    rd.check_keys(commodities, set(commodities), "commodities")
    comms = tuple(Commodity(cid, str(name)) for cid, name in commodities.items())

    rd.read_profiles(doc.get("profiles", {}))
    procs = doc["processes"]
    rd.check_keys(procs, set(procs), "processes")
    processes = tuple(rd.process(pid, spec) for pid, spec in procs.items())

    demands = {}
    for pid, table in doc.get("demands", {}).items():
        rd.check_keys(table, set(table), f"demands.{pid}")
        for co, ref in table.items():
            demands[(pid, co)] = rd.profile(ref, f"demands.{pid}", co)

    system = EnergySystem(comms, processes, steps, dt, demands, str(doc.get("name", "")))
    report = validate(system)
    if not report.ok:
        raise ValidationError(report)
    return system


def load_scenario(path) -> EnergySystem:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario: {exc.strerror}", path=path) from None
    return parse_scenario(text, path)


def scenario_document(system: EnergySystem, profile_csv: str | None = None) -> dict:
    """TOML tree for ``system`` with defaults left out.

    Profiles are inlined, or, with ``profile_csv``, referenced as columns of
    that CSV file (which :func:`save_scenario` writes next to the scenario).
    """
    doc: dict = {}
    if system.name:
        doc["name"] = system.name
    doc["horizon"] = {"steps": system.horizon, "dt": system.dt}
    doc["commodities"] = {c.id: c.name for c in system.commodities}
    profiles: dict = {}
    procs: dict = {}
    out_defaults = Output("")
    st_defaults = StorageParams()
    for p in system.processes:
        spec: dict = {"kind": p.kind.value}
        if p.inputs:
            spec["inputs"] = list(p.inputs)
        outs = []
        for out in p.outputs:
            o: dict = {"commodity": out.commodity}
            if out.flexible:
                o["efficiency_range"] = list(out.efficiency_range)
                if out.efficiency is not None:
                    o["efficiency"] = out.efficiency
            elif out.efficiency != out_defaults.efficiency:
                o["efficiency"] = out.efficiency
            for k in ("capacity", "cost", "emission"):
                if getattr(out, k) != getattr(out_defaults, k):
                    o[k] = getattr(out, k)
            if out.availability is not None:
                name = f"{p.id}_{out.commodity}_availability"
                profiles[name] = list(out.availability)
                o["availability"] = name
            outs.append(o)
        if outs:
            spec["outputs"] = outs
        if p.storage is not None:
            spec["storage"] = {f.name: getattr(p.storage, f.name) for f in fields(StorageParams)
                               if getattr(p.storage, f.name) != getattr(st_defaults, f.name)}
        procs[p.id] = spec
    demands: dict = {}
    for (pid, co), prof in system.demands.items():
        name = f"{pid}_{co}"
        profiles[name] = list(prof)
        demands.setdefault(pid, {})[co] = name
    if profiles and profile_csv:
        doc["profiles"] = {name: {"csv": profile_csv, "column": name} for name in profiles}
    elif profiles:
        doc["profiles"] = profiles
    doc["processes"] = procs
    if demands:
        doc["demands"] = demands
    return doc


def dump_scenario(system: EnergySystem) -> str:
    return tomli_w.dumps(scenario_document(system))


def save_scenario(system: EnergySystem, path, *, profile_csv: str | None = None) -> Path:
    """Write ``system`` to ``path``; optionally put its profiles in a CSV beside it."""
    path = Path(path)
    doc = scenario_document(system, profile_csv)
    if profile_csv:
        columns = {ref["column"]: None for ref in doc.get("profiles", {}).values()}
        inline = scenario_document(system)["profiles"]
        with (path.parent / profile_csv).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(columns))
            for t in range(system.horizon):
                w.writerow([repr(float(inline[c][t])) for c in columns])
    path.write_text(tomli_w.dumps(doc), encoding="utf-8")
    return path


@dataclass(frozen=True)
class Row:
    scenario: str
    series: str
    t: int
    value: float
    unit: str
    flag: str = "ok"


@dataclass
class ResultTable:
    """Long-format results: one row per (series, t)."""

    rows: list[Row] = field(default_factory=list)

    def add_series(self, scenario: str, series: str, values, unit: str, flags=None) -> None:
        for t, v in enumerate(values):
            flag = flags[t] if flags is not None else "ok"
            if flag not in FLAGS:
                raise ValueError(f"unknown flag {flag!r}")
            self.rows.append(Row(scenario, series, t, float(v), unit, flag))

    def series_names(self) -> list[str]:
        return list(dict.fromkeys(r.series for r in self.rows))

    def series(self, name: str) -> list[float]:
        return [r.value for r in sorted((r for r in self.rows if r.series == name), key=lambda r: r.t)]

    def flags(self, name: str) -> list[str]:
        return [r.flag for r in sorted((r for r in self.rows if r.series == name), key=lambda r: r.t)]

    def check_unique(self) -> None:
        seen = set()
        for r in self.rows:
            key = (r.scenario, r.series, r.t)
            if key in seen:
                raise ValueError(f"duplicate row {key}")
            seen.add(key)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([r.scenario, r.series, r.t, repr(r.value), r.unit, r.flag])
        return path

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        rows = []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != CSV_HEADER:
                raise ValueError(f"unexpected header {header}")
            for rec in reader:
                s, name, t, v, unit, flag = rec
                rows.append(Row(s, name, int(t), float(v), unit, flag))
        return cls(rows)
