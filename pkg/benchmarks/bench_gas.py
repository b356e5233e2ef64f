"""Throughput of the compiled gas kernel against the pure-Python fallback.

Each backend runs in its own interpreter because the choice is made once at
import (``MMLAB_PURE_PYTHON``).  Prints single-site updates per second.

    python3 benchmarks/bench_gas.py [--sizes 16 40 100] [--sweeps 200]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from mmlab import gas
from mmlab._backend import BACKEND
n, sweeps = int(sys.argv[1]), int(sys.argv[2])
pot = gas.Potential.from_wells([gas.WellSpec(-1.0, 1.0), gas.WellSpec(1.0, 4.0)])
cfg = gas.GasConfig(n=n, beta=1e4, potential=pot, sweeps=sweeps, burn_in=0, thin=1, seed=0, adapt=False)
gas.run_gas(gas.GasConfig(n=n, beta=1e4, potential=pot, sweeps=2, burn_in=0, thin=1))
t0 = time.perf_counter()
run = gas.run_gas(cfg)
dt = time.perf_counter() - t0
print(json.dumps({"backend": BACKEND, "seconds": dt, "updates_per_s": n * sweeps / dt,
                  "checksum": float(run.samples.sum())}))
"""


def measure(n: int, sweeps: int, pure: bool) -> dict:
    env = dict(os.environ)
    env.pop("MMLAB_PURE_PYTHON", None)
    if pure:
        env["MMLAB_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", CHILD, str(n), str(sweeps)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 40, 100])
    ap.add_argument("--sweeps", type=int, default=200)
    args = ap.parse_args()
    print(f"{'N':>5} {'backend':>8} {'updates/s':>12} {'speedup':>8}  same path")
    for n in args.sizes:
        fast = measure(n, args.sweeps, pure=False)
        # the pure-Python kernel is slow; fewer sweeps keep the run short
        slow = measure(n, max(1, args.sweeps // 10), pure=True)
        same = measure(n, max(1, args.sweeps // 10), pure=False)["checksum"] == slow["checksum"]
        print(f"{n:>5} {slow['backend']:>8} {slow['updates_per_s']:>12.3g} {'1.0':>8}")
        print(f"{n:>5} {fast['backend']:>8} {fast['updates_per_s']:>12.3g} "
              f"{fast['updates_per_s'] / slow['updates_per_s']:>8.1f}  {same}")


if __name__ == "__main__":
    main()
