"""Compare the numba and numpy Pauli kernels.

    python benchmarks/bench_kernels.py [--repeat 20]

Times the Pauli transform on Jacobian-sized stacks (L*K matrices) for 3 and 5
qubits, then one full GEOPE run per path in a subprocess so the
``GEOPULSE_DISABLE_NUMBA`` switch takes effect at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from geopulse import _kernels

E2E = """
import time
from geopulse.geope import GeopeConfig, run
from geopulse.model import rydberg_problem
p = rydberg_problem(3, target="toffoli")
run(p, GeopeConfig(eta_max=1.29, max_iters=1), 20)
t0 = time.perf_counter()
for seed in range(5):
    run(p, GeopeConfig(eta_max=1.29, max_iters=30, seed=seed), 20)
print((time.perf_counter() - t0) / 5)
"""


def bench_transform(repeat: int) -> None:
    rng = np.random.default_rng(0)
    for n, stack in ((3, 20 * 6), (5, 120 * 10)):
        dim = 2**n
        mats = rng.normal(size=(stack, dim, dim)) + 1j * rng.normal(size=(stack, dim, dim))
        row = [f"transform n={n} stack={stack}"]
        for name in ("numpy", "numba"):
            fn = getattr(_kernels, f"pauli_transform_{name}")
            fn(mats)  # compile / warm caches
            t = min(timeit.repeat(lambda: fn(mats), number=1, repeat=repeat))
            row.append(f"{name} {1e3 * t:8.3f} ms")
        print("  ".join(row))


def bench_end_to_end() -> None:
    for flag in ("1", "0"):
        env = dict(os.environ, GEOPULSE_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        label = "numpy" if flag == "1" else "numba"
        print(f"geope toffoli L=20 run  {label} {float(out.stdout):.3f} s")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if _kernels.numba is None:
        sys.exit("numba is not installed; nothing to compare")
    bench_transform(args.repeat)
    bench_end_to_end()


if __name__ == "__main__":
    main()
