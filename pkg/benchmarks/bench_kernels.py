"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once before timing so numba compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from starris import _kernels
from starris.gain import random_angles
from starris.ris import design_sub_connected, subsurface_index
from starris.scenario import subcarrier_frequencies


def cases(rng):
    fc, N1, N2, S1, S2 = 100e9, 16, 16, 4, 4
    grid = subcarrier_frequencies(fc, 10e9, 128)
    f, xi = grid.frequencies, grid.relative
    n1, n2 = np.divmod(np.arange(N1 * N2), N2)
    n1, n2 = n1.astype(float), n2.astype(float)
    u1, v1, ui, vi = random_angles(rng)
    phase = rng.uniform(-np.pi, np.pi, N1 * N2)
    tau = rng.uniform(0, 1e-11, N1 * N2)
    p1, p2, ts = design_sub_connected(u1, v1, ui, vi, fc, N1, N2, S1, S2)
    sub = subsurface_index(N1, N2, S1, S2)[0].astype(np.int64)

    n = 256
    A = rng.standard_normal((n, n))
    H = A @ A.T / n
    lam, q = np.linalg.eigh(2 * H)
    g = rng.standard_normal(n)
    z0 = np.zeros(n)
    x = rng.standard_normal(4096)
    y = rng.standard_normal(4096)
    return {
        "array_factor (256 el x 128 f)":
            lambda k: k.array_factor(xi, f, n1, n2, 0.3, -0.2, phase, tau),
        "two_stage_factor (256 el, 16 sub x 128 f)":
            lambda k: k.two_stage_factor(xi, f, n1, n2, sub, S1 * S2, 0.3, -0.2, 0.1,
                                         0.4, p1, p2, ts, 16.0),
        "project_quarter_disk (4096)":
            lambda k: k.project_quarter_disk(x, y),
        "admm_loop (256 pairs, 200 it)":
            lambda k: k.admm_loop(q, lam, q, lam, g, g, 1.0, z0, z0, z0, z0, 200, 0.0,
                                  10.0),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = [_kernels.NUMPY] + ([_kernels.NUMBA] if _kernels.NUMBA else [])
    print(f"{'kernel':45s}" + "".join(f"{b.name:>12s}" for b in backends) + "     speedup")
    for name, call in cases(np.random.default_rng(0)).items():
        times = []
        for backend in backends:
            call(backend)
            number = 3
            best = min(timeit.repeat(lambda: call(backend), number=number,
                                     repeat=args.repeat)) / number
            times.append(best)
        speed = f"{times[0] / times[1]:10.1f}x" if len(times) > 1 else ""
        print(f"{name:45s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
