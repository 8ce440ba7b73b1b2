"""Scan the MC heat-storage capacity and report the day-2 mixed-supply hour.

    python scripts/tune_mc_storage.py [--from 3] [--to 6] [--step 0.25]

On day 2 of MC scenario 2 the storage empties within one hour; the heat
intensity of that hour mixes zero-CO2 stored heat with CHP heat. Where that
happens within the hour (and hence the mixed value) depends on the storage
size, which is what this scan shows. Each capacity also re-checks MC scenario 1
for CHP heat throttling, which should not occur.
"""

import argparse

import numpy as np

import co2intensity.scenarios as sc
from co2intensity.asis import compute_asis
from co2intensity.dispatch import solve_dispatch
from co2intensity.scenarios import CHP_TOTAL_EFFICIENCY, CHP_ELEC_EFFICIENCY


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--from", dest="lo", type=float, default=3.0)
    parser.add_argument("--to", dest="hi", type=float, default=6.0)
    parser.add_argument("--step", type=float, default=0.25)
    args = parser.parse_args()
    default = sc.MC_STORAGE_CAPACITY
    heat_ratio = CHP_TOTAL_EFFICIENCY - CHP_ELEC_EFFICIENCY
    try:
        for cap in np.arange(args.lo, args.hi + 1e-9, args.step):
            sc.MC_STORAGE_CAPACITY = float(cap)
            mc1 = solve_dispatch(sc.make_mc_system(1))
            gas = mc1.e_in[("gas", "chp")]
            throttled = int(np.sum(mc1.e_out[("chp", "heat")] < heat_ratio * gas - 1e-6))
            system = sc.make_mc_system(2)
            heat = compute_asis(system, solve_dispatch(system)).intensity["heat"]
            mixed = [(t, round(float(v), 3)) for t, v in enumerate(heat) if 1e-6 < v < 0.25 - 1e-6]
            print(f"capacity {cap:5.2f} GWh  mixed hours {mixed}  MC1 throttled hours {throttled}")
    finally:
        sc.MC_STORAGE_CAPACITY = default


if __name__ == "__main__":
    main()
