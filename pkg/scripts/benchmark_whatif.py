"""Compare the basis-solve what-if sweep with the finite-difference oracle.

    python scripts/benchmark_whatif.py [names...]

Reports LP solves, factorizations, wall time and the largest disagreement.
"""

import argparse
import time

import numpy as np

from co2intensity import lp
from co2intensity.dispatch import solve_dispatch
from co2intensity.scenarios import BUILTIN, builtin
from co2intensity.whatif import compute_whatif, fd_sweep


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", default=list(BUILTIN))
    args = parser.parse_args()
    for name in args.names:
        system = builtin(name)
        lp.reset_counters()
        t0 = time.perf_counter()
        base = solve_dispatch(system)
        w = compute_whatif(system, base)
        t_basis = time.perf_counter() - t0
        sweep = dict(lp.COUNTERS)
        t0 = time.perf_counter()
        fd = fd_sweep(system, base)
        t_fd = time.perf_counter() - t0
        ok = [abs(w.intensity[co][t] - v) for (co, t), v in fd.items() if (co, t) not in w.degenerate]
        print(f"{name:4s} basis: {sweep['lp_solves']} LP solve(s), {sweep['factorizations']} factorization(s), "
              f"{t_basis:6.2f} s | fd: {1 + len(fd)} LP solves, {t_fd:6.2f} s | "
              f"max |delta| {max(ok, default=0.0):.1e}, degenerate {len(w.degenerate)}/{len(fd)}")


if __name__ == "__main__":
    main()
