"""Regenerate the shipped scenario files from the in-code factories.

    python scripts/export_scenarios.py [--out scenarios]

The MC scenario 2 file keeps its profiles in a CSV beside it; the others
inline them.
"""

import argparse
from pathlib import Path

from co2intensity.scenario_io import load_scenario, save_scenario
from co2intensity.scenarios import BUILTIN

CSV_PROFILES = {"mc2"}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "scenarios")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, factory in BUILTIN.items():
        system = factory()
        path = args.out / f"{name}.scenario"
        save_scenario(system, path, profile_csv=f"{name}_profiles.csv" if name in CSV_PROFILES else None)
        assert load_scenario(path) == system, f"{path} does not round-trip"
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
