"""Time the SDE kernels under the numba and numpy backends.

Usage: python3 benchmarks/bench_kernels.py [--paths N] [--repeat R]

Both backends are called in-process through ``run_paths(..., backend=...)``.
The first numba call includes compilation (or a cache load) and is reported
separately.  Endpoints from the two backends must agree to rounding.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from burgerslab import sde_kernels as K
from burgerslab._accel import USE_NUMBA
from burgerslab.rng import path_keys

CASES = {
    # name: (model, params, kappa, x0, out_sig, dt_fine, dt_coarse)
    "stationary Pr=1": (K.STATIONARY, [1.0, 1e-2, 1.0], 1e-2, 0.0, [1.0], 1e-3, 1e-2),
    "khokhlov backward": (K.KHOKHLOV_BACKWARD, [1.0, 0.05, 1.0], 0.05, 0.2, [0.5], 1e-3, 5e-3),
    "khokhlov log-time": (K.KHOKHLOV_LOGTIME, [1.0, 1e-2, 1.0], 1e-2, 0.0, [1.0], 1e-3, 1e-2),
    "khokhlov forward": (K.KHOKHLOV_FORWARD, [1.0, 0.2, 1.0], 0.2, 0.0, [0.25], 2e-3, 2e-3),
}


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    keys = path_keys(1, np.arange(args.paths))
    print(f"{'case':<20} {'numpy s':>9} {'numba s':>9} {'first s':>9} {'speedup':>8} {'max diff':>10}")
    for name, (model, p, kappa, x0, sig, fine, coarse) in CASES.items():
        def go(backend):
            return K.run_paths(model, p, kappa, x0, keys, sig, fine, coarse, backend=backend)[0]
        t_np, x_np = _time(lambda: go("numpy"), args.repeat)
        if USE_NUMBA:
            t_first, _ = _time(lambda: go("numba"), 1)
            t_nb, x_nb = _time(lambda: go("numba"), args.repeat)
            diff = float(np.nanmax(np.abs(x_nb - x_np)))
            print(f"{name:<20} {t_np:9.3f} {t_nb:9.3f} {t_first:9.3f} {t_np / t_nb:8.1f} {diff:10.2e}")
        else:
            print(f"{name:<20} {t_np:9.3f} {'-':>9} {'-':>9} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
