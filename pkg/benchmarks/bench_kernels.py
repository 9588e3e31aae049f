"""Time the numba kernels against their numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from aqec import _kernels
from aqec.spin_chain import _xxx_hamiltonians


def _gram(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return a @ a.conj().T


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", type=int, default=400)
    ap.add_argument("--batch", type=int, default=5000)
    ap.add_argument("--N", type=int, default=8)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    gram = _gram(rng)
    thetas = np.linspace(0, np.pi, args.grid)
    phis = np.linspace(0, 2 * np.pi, 2 * args.grid, endpoint=False)
    hams = _xxx_hamiltonians(args.N, rng.uniform(-0.01, 0.01, (args.batch, args.N - 1)))

    cases = {
        f"grid_min_fidelity ({args.grid}x{2 * args.grid})": lambda u: _kernels.grid_min_fidelity(gram, thetas, phis, use_numba=u),
        f"batch_transfer ({args.batch} x N={args.N})": lambda u: _kernels.batch_transfer(hams, 53.09, args.N - 1, 0, use_numba=u),
    }
    print(f"numba available: {_kernels.HAVE_NUMBA}")
    print(f"{'kernel':<36}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, fn in cases.items():
        ref = fn(False)
        t_np = min(timeit.repeat(lambda: fn(False), number=1, repeat=args.repeat))
        if not _kernels.HAVE_NUMBA:
            print(f"{name:<36}{1e3 * t_np:>12.2f}{'n/a':>12}{'':>10}")
            continue
        got = fn(True)  # compile outside the timed region
        diff = np.abs(np.asarray(got[0] if isinstance(got, tuple) else got)
                      - np.asarray(ref[0] if isinstance(ref, tuple) else ref)).max()
        assert diff < 1e-9, f"{name}: paths disagree by {diff}"
        t_nb = min(timeit.repeat(lambda: fn(True), number=1, repeat=args.repeat))
        print(f"{name:<36}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
