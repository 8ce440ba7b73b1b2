"""Command-line front end: dispatch, as-is and what-if analysis, CSV export.

    co2intensity run --builtin sc2 --method both --out results/
    co2intensity run --scenario my.scenario --method whatif --fd-check

Exit codes: 0 success, 1 finite-difference check failed, 2 usage error,
3 infeasible or unbounded dispatch (including a demand that cannot be raised
for a finite difference), 4 invalid scenario, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import lp as lpcore
from .asis import EPS, SingularTraceSystem, compute_asis
from .dispatch import (COST_PERTURBATION, DEMAND_TILT, InfeasibleSystem, UnboundedModel,
                       solve_dispatch)
from .model import EnergySystem, ValidationError
from .scenario_io import ParseError, ResultTable, Row, load_scenario
from .scenarios import BUILTIN, builtin
from .whatif import (DEGENERACY_TOL, FD_RELATIVE_STEP, InfeasiblePerturbation, compute_whatif,
                     fd_sweep)

EXIT_OK, EXIT_FD_MISMATCH, EXIT_USAGE, EXIT_DISPATCH, EXIT_SCENARIO, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5


@dataclass
class Analysis:
    table: ResultTable
    manifest: dict
    fd_ok: bool = True


def fd_entries(system: EnergySystem, sample: int | None, seed: int = 0) -> list[tuple[str, int]]:
    """All demanded (co, t), or a reproducible random subset of ``sample`` of them."""
    entries = [(co, t) for co in system.demanded_commodities for t in range(system.horizon)]
    if sample is None or sample >= len(entries):
        return entries
    pick = np.random.default_rng(seed).choice(len(entries), size=sample, replace=False)
    return [entries[i] for i in sorted(pick)]


def analyze(system: EnergySystem, *, method: str = "both", fd_check: bool = False,
            fd_sample: int | None = None, tol: float = DEGENERACY_TOL, source: str = "") -> Analysis:
    """Run dispatch and the requested analyses; collect table rows and manifest."""
    lpcore.reset_counters()
    name = system.name or "scenario"
    table = ResultTable()
    dispatch = solve_dispatch(system)
    T = system.horizon

    for (cp, co), v in dispatch.e_out.items():
        table.add_series(name, f"E_out:{cp}:{co}", v, "GWh")
    for (co, cp), v in dispatch.e_in.items():
        table.add_series(name, f"E_in:{cp}:{co}", v, "GWh")
    for cp, v in dispatch.sl.items():
        table.add_series(name, f"SL:{cp}", v, "GWh")

    manifest: dict = {
        "package_version": __version__,
        "scenario": name,
        "source": source,
        "method": method,
        "parameters": {
            "horizon": T,
            "dt": system.dt,
            "commodities": system.commodity_ids,
            "processes": [p.id for p in system.processes],
            "fd_check": fd_check or fd_sample is not None,
            "fd_sample": fd_sample,
        },
        "tolerances": {
            "threshold_eps_gwh": EPS,
            "cost_perturbation": COST_PERTURBATION,
            "demand_tilt": DEMAND_TILT,
            "degeneracy_tol": tol,
            "fd_relative_step": FD_RELATIVE_STEP,
        },
        "dispatch": {
            "iterations": dispatch.sol.iterations,
            "n_rows": dispatch.lp.n_rows,
            "n_cols": dispatch.lp.n_cols,
            "cost": dispatch.cost,
            "m_tot_t": dispatch.m_tot,
        },
    }

    if method in ("asis", "both"):
        asis = compute_asis(system, dispatch)
        for co, v in asis.intensity.items():
            flags = ["thresholded" if ("commodity", co, t) in asis.thresholded else "ok" for t in range(T)]
            table.add_series(name, f"I_asis:{co}", v, "t/MWh", flags)
        for cp, v in asis.storage_intensity.items():
            flags = ["thresholded" if ("storage", cp, t) in asis.thresholded else "ok" for t in range(T)]
            table.add_series(name, f"I_stor:{cp}", v, "t/MWh", flags)
        manifest["asis"] = {
            "conservation_residual": asis.conservation_residual,
            "max_trace_residual": asis.max_residual,
            "thresholded_entries": len(asis.thresholded),
        }

    fd_ok = True
    if method in ("whatif", "both"):
        whatif = compute_whatif(system, dispatch, tol=tol)
        for co, v in whatif.intensity.items():
            flags = ["degenerate" if (co, t) in whatif.degenerate else "ok" for t in range(T)]
            table.add_series(name, f"I_whatif:{co}", v, "t/MWh", flags)
        manifest["whatif"] = {
            "lp_solves": lpcore.COUNTERS["lp_solves"],
            "factorizations": lpcore.COUNTERS["factorizations"],
            "fd_fallbacks": whatif.n_fallback(),
            "fd_step": whatif.fd_step,
            "degenerate": [{"commodity": co, "t": t, "forward": float(f), "backward": float(b)}
                           for (co, t), (f, b) in sorted(whatif.degenerate.items())],
        }
        if fd_check or fd_sample is not None:
            before = lpcore.COUNTERS["lp_solves"]
            entries = fd_entries(system, fd_sample)
            fd = fd_sweep(system, dispatch, entries=entries, fd_step=whatif.fd_step)
            mismatches = []
            for co in system.demanded_commodities:
                ts = [t for (c, t) in entries if c == co]
                for t in ts:
                    ref = fd[(co, t)]
                    delta = whatif.intensity[co][t] - ref
                    flag = "degenerate" if (co, t) in whatif.degenerate else "ok"
                    table.rows.append(Row(name, f"I_fd:{co}", t, float(ref), "t/MWh", flag))
                    table.rows.append(Row(name, f"fd_delta:{co}", t, float(delta), "t/MWh", flag))
                    if flag == "ok" and abs(delta) > max(tol, 1e-4 * abs(ref)):
                        mismatches.append({"commodity": co, "t": t, "whatif": float(whatif.intensity[co][t]),
                                           "fd": ref})
            deltas = [abs(whatif.intensity[co][t] - fd[(co, t)]) for co, t in entries
                      if (co, t) not in whatif.degenerate]
            fd_ok = not mismatches
            manifest["fd_check"] = {
                "entries": len(entries),
                "lp_solves": lpcore.COUNTERS["lp_solves"] - before,
                "max_abs_delta": max(deltas, default=0.0),
                "mismatches": mismatches,
            }

    manifest["counters"] = {"lp_solves": lpcore.COUNTERS["lp_solves"],
                            "factorizations": lpcore.COUNTERS["factorizations"]}
    table.check_unique()
    return Analysis(table, manifest, fd_ok)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="co2intensity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="dispatch a scenario and compute CO2 intensities")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario file")
    src.add_argument("--builtin", choices=sorted(BUILTIN), help="built-in test system")
    run.add_argument("--method", choices=("asis", "whatif", "both"), default="both")
    run.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    run.add_argument("--fd-check", action="store_true",
                     help="compare what-if values against finite differences for every (co, t)")
    run.add_argument("--fd-sample", type=int, metavar="N",
                     help="like --fd-check, on N randomly chosen (co, t)")
    run.add_argument("--tol", type=float, default=DEGENERACY_TOL,
                     help="degeneracy and finite-difference tolerance [t/MWh]")
    run.add_argument("--json-manifest", action="store_true", help="also print the manifest to stdout")
    return parser


def run(args: argparse.Namespace) -> int:
    if args.fd_sample is not None and args.fd_sample < 1:
        print("error: --fd-sample must be positive", file=sys.stderr)
        return EXIT_USAGE
    if (args.fd_check or args.fd_sample is not None) and args.method == "asis":
        print("error: finite-difference checks need --method whatif or both", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.builtin:
            system, source = builtin(args.builtin), f"builtin:{args.builtin}"
        else:
            system, source = load_scenario(args.scenario), str(args.scenario)
    except (ParseError, ValidationError) as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO

    try:
        result = analyze(system, method=args.method, fd_check=args.fd_check,
                         fd_sample=args.fd_sample, tol=args.tol, source=source)
    except (InfeasibleSystem, UnboundedModel, InfeasiblePerturbation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISPATCH
    except (SingularTraceSystem, lpcore.NumericalFailure) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    args.out.mkdir(parents=True, exist_ok=True)
    result.table.to_csv(args.out / "results.csv")
    text = json.dumps(result.manifest, indent=2, sort_keys=True)
    (args.out / "manifest.json").write_text(text + "\n", encoding="utf-8")
    if args.json_manifest:
        print(text)
    else:
        print(f"{result.manifest['scenario']}: {len(result.table.rows)} rows written to "
              f"{args.out / 'results.csv'}")
    if not result.fd_ok:
        n = len(result.manifest["fd_check"]["mismatches"])
        print(f"error: {n} what-if values disagree with finite differences", file=sys.stderr)
        return EXIT_FD_MISMATCH
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
