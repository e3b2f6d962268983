"""Counter-based random numbers.

Every variate is a pure function of ``(master_seed, path_index, counter)``
so ensembles do not depend on how paths are split across workers.  The
mixer is the splitmix64 finaliser.  Normals use Box-Muller on two
independent 53-bit uniforms; variates 2j and 2j+1 are the cosine and sine
outputs of pair j.
"""
from __future__ import annotations

import numpy as np

from ._accel import jit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO = np.uint64(2)
_INV53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * np.pi


def _mix_py(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


_mix = jit(_mix_py)


def path_keys(master_seed: int, index) -> np.ndarray:
    """Per-path stream keys ``hash(master_seed, i)`` as uint64."""
    idx = np.asarray(index, dtype=np.uint64)
    base = _mix_py(np.array([np.uint64(int(master_seed) % (1 << 64))], dtype=np.uint64) + _GOLDEN)
    with np.errstate(over="ignore"):
        return _mix_py(base + _mix_py(idx + _GOLDEN))


def uniforms(keys: np.ndarray, counter: int) -> np.ndarray:
    """Uniform(0,1) variates for each key at a fixed counter (vectorised)."""
    keys = np.asarray(keys, dtype=np.uint64)
    c = np.uint64(counter)
    with np.errstate(over="ignore"):
        h = _mix_py(keys + (c + _ONE) * _GOLDEN)
    return ((h >> _S11).astype(np.float64) + 0.5) * _INV53


@jit
def normal_pair(key, j):
    """Both Box-Muller outputs of pair ``j`` (variates 2j and 2j+1)."""
    c = np.uint64(2) * j
    h1 = _mix(key + (c + np.uint64(1)) * np.uint64(0x9E3779B97F4A7C15))
    h2 = _mix(key + (c + np.uint64(2)) * np.uint64(0x9E3779B97F4A7C15))
    u1 = (np.float64(h1 >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)
    u2 = (np.float64(h2 >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)
    r = np.sqrt(-2.0 * np.log(u1))
    th = 2.0 * np.pi * u2
    return r * np.cos(th), r * np.sin(th)


@jit
def normal_scalar(key, k):
    zc, zs = normal_pair(key, k >> np.uint64(1))
    return zc if (k & np.uint64(1)) == np.uint64(0) else zs


def normals(keys: np.ndarray, k) -> np.ndarray:
    """Vectorised standard normals, one per key, at per-key index ``k``."""
    keys = np.asarray(keys, dtype=np.uint64)
    k = np.asarray(k, dtype=np.uint64)
    c = _TWO * (k >> _ONE)
    with np.errstate(over="ignore"):
        h1 = _mix_py(keys + (c + _ONE) * _GOLDEN)
        h2 = _mix_py(keys + (c + _TWO) * _GOLDEN)
    u1 = ((h1 >> _S11).astype(np.float64) + 0.5) * _INV53
    u2 = ((h2 >> _S11).astype(np.float64) + 0.5) * _INV53
    r = np.sqrt(-2.0 * np.log(u1))
    th = TWO_PI * u2
    return np.where((k & _ONE) == 0, r * np.cos(th), r * np.sin(th))
