"""Run every built-in scenario and write plot-ready tables.

    python scripts/run_all.py [--out results] [--fd-check]

Each scenario gets ``<out>/<name>/results.csv`` and ``manifest.json``; a short
summary of the headline numbers is printed at the end.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from co2intensity.cli import analyze
from co2intensity.scenarios import BUILTIN, builtin


def headline(name: str, table) -> str:
    def s(key):
        return np.array(table.series(key))

    if name.startswith("sc"):
        a, w = s("I_asis:elec"), s("I_whatif:elec")
        return f"as-is elec {a.min():.3f}..{a.max():.3f}  what-if levels {sorted(set(np.round(w, 3).tolist()))}"
    a_e, a_h = s("I_asis:elec"), s("I_asis:heat")
    w_e, w_h = s("I_whatif:elec"), s("I_whatif:heat")
    mixed = [f"t={t}:{v:.3f}" for t, v in enumerate(a_h) if 1e-6 < v < 0.25 - 1e-6]
    return (f"as-is elec {a_e.min():.3f}..{a_e.max():.3f} heat {a_h.min():.3f}..{a_h.max():.3f}  "
            f"what-if elec {w_e.min():.3f}..{w_e.max():.3f} heat {w_h.min():.3f}..{w_h.max():.3f}"
            + (f"  mixed heat hours {mixed}" if mixed else ""))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--fd-check", action="store_true")
    args = parser.parse_args()
    lines = []
    for name in BUILTIN:
        res = analyze(builtin(name), fd_check=args.fd_check, source=f"builtin:{name}")
        d = args.out / name
        d.mkdir(parents=True, exist_ok=True)
        res.table.to_csv(d / "results.csv")
        (d / "manifest.json").write_text(json.dumps(res.manifest, indent=2, sort_keys=True) + "\n")
        m = res.manifest
        lines.append(f"{name:4s} M_tot={m['dispatch']['m_tot_t']:9.1f} t  "
                     f"LP solves={m['counters']['lp_solves']:3d}  {headline(name, res.table)}")
    print("\n".join(lines))


if __name__ == "__main__":
    main()
