"""Euler-Maruyama kernels for the stochastic Lagrangian flows.

All kernels integrate forward in a clock ``sig`` starting at 0.  Backward
flows use sig = t - s, so the backward Ito equation becomes a forward one
with drift -u.  Steps are layer-adaptive.  Within 8 layer half-widths of
the origin the fine step is used.  Outside, the step grows with the
distance ``d`` to that zone: h = min(coarse, (d / 4 amp)^2, d / 2|b|), so
neither the drift nor a 4-sigma noise increment carries a path into the
layer in one step.  Beyond 8 half-widths tanh is within 2e-7 of +-1.

The physics functions are written once with numpy ufuncs and scalar branch
tests on ``model``.  Numba compiles them for scalars, and the numpy
fallback calls them on arrays of paths.

Models and their parameter vectors ``p``:

0. stationary shock: drift d u0 tanh(u0 x / 2 nu), or d u0 sign(x) at nu = 0.
   d = +1 is the backward flow, d = -1 the forward one.  p = [u0, nu, d]
1. Khokhlov, backward from t: drift -u(x, t - sig).  p = [L, nu, t]
2. Khokhlov in log-time: drift -(x - L tanh(L x e^sig / 2 nu tf)), noise
   variance factor tf e^-sig.  p = [L, nu, tf]
3. Khokhlov, forward from t_start: drift u(x, t_start + sig).  The running
   integral of d phi/dt is accumulated with the trapezoid rule.
   p = [L, nu, t_start]
4. tabulated velocity, backward from t: bilinear in (x, s); global step.
   p = [t, x_lo, dx, nx, s_lo, ds, ns]
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._accel import USE_NUMBA, jit
from .rng import normal_pair, normals

STATIONARY, KHOKHLOV_BACKWARD, KHOKHLOV_LOGTIME, KHOKHLOV_FORWARD, TABULATED = range(5)
LAYER_WIDTHS = 8.0
NOISE_WIDTHS = 4.0
DRIFT_FRACTION = 0.5


def _drift(model, p, x, sig):
    if model == 0:
        if p[1] > 0.0:
            return p[2] * p[0] * np.tanh(p[0] * x / (2.0 * p[1]))
        return p[2] * p[0] * np.sign(x)
    if model == 1:
        s = p[2] - sig
        return -(x - p[0] * np.tanh(p[0] * x / (2.0 * p[1] * s))) / s
    if model == 2:
        return -(x - p[0] * np.tanh(p[0] * x * np.exp(sig) / (2.0 * p[1] * p[2])))
    t = p[2] + sig
    return (x - p[0] * np.tanh(p[0] * x / (2.0 * p[1] * t))) / t


def _noise_factor(model, p, sig):
    if model == 2:
        return p[2] * np.exp(-sig)
    return 1.0 + 0.0 * sig


def _layer(model, p, sig):
    if model == 0:
        return 2.0 * p[1] / p[0] + 0.0 * sig
    if model == 1:
        return 2.0 * p[1] * (p[2] - sig) / p[0]
    if model == 2:
        return 2.0 * p[1] * p[2] * np.exp(-sig) / p[0]
    if model == 3:
        return 2.0 * p[1] * (p[2] + sig) / p[0]
    return 1e300 + 0.0 * sig


def _dphi_dt(model, p, x, sig):
    # time derivative of x^2/2t - 2 nu log cosh(L x / 2 nu t)
    if model != 3:
        return 0.0 * x
    L, nu = p[0], p[1]
    t = p[2] + sig
    return -x * x / (2.0 * t * t) + L * x / (t * t) * np.tanh(L * x / (2.0 * nu * t))


def _table_drift_np(p, table, x, sig):
    s = p[0] - sig
    nx, ns = table.shape
    fx = (x - p[1]) / p[2]
    fs = (s - p[4]) / p[5]
    i = np.clip(np.floor(fx), 0, nx - 2).astype(np.int64)
    j = np.clip(np.floor(fs), 0, ns - 2).astype(np.int64)
    wx = np.clip(fx - i, 0.0, 1.0)
    ws = np.clip(fs - j, 0.0, 1.0)
    v = ((1 - wx) * (1 - ws) * table[i, j] + wx * (1 - ws) * table[i + 1, j]
         + (1 - wx) * ws * table[i, j + 1] + wx * ws * table[i + 1, j + 1])
    return -v


def _table_drift_scalar(p, table, x, sig):
    s = p[0] - sig
    nx, ns = table.shape
    fx = (x - p[1]) / p[2]
    fs = (s - p[4]) / p[5]
    i = int(min(max(np.floor(fx), 0.0), nx - 2.0))
    j = int(min(max(np.floor(fs), 0.0), ns - 2.0))
    wx = min(max(fx - i, 0.0), 1.0)
    ws = min(max(fs - j, 0.0), 1.0)
    v = ((1 - wx) * (1 - ws) * table[i, j] + wx * (1 - ws) * table[i + 1, j]
         + (1 - wx) * ws * table[i, j + 1] + wx * ws * table[i + 1, j + 1])
    return -v


def _step(dist, amp, speed, dt_fine, dt_coarse):
    # fine inside the layer zone; otherwise as large as the distance allows
    lim = np.minimum(dt_coarse, np.minimum((dist / (NOISE_WIDTHS * amp + 1e-300)) ** 2,
                                           DRIFT_FRACTION * dist / (speed + 1e-300)))
    return np.where(dist > 0.0, np.maximum(dt_fine, lim), dt_fine)


def _step_scalar(dist, amp, speed, dt_fine, dt_coarse):
    if dist <= 0.0:
        return dt_fine
    lim = min(dt_coarse, (dist / (NOISE_WIDTHS * amp + 1e-300)) ** 2,
              DRIFT_FRACTION * dist / (speed + 1e-300))
    return max(dt_fine, lim)


_step_nb = jit(_step_scalar)
_drift_nb = jit(_drift)
_noise_factor_nb = jit(_noise_factor)
_layer_nb = jit(_layer)
_dphi_dt_nb = jit(_dphi_dt)
_table_drift_nb = jit(_table_drift_scalar)


@jit
def _run_numba(model, p, kappa, x0, keys, out_sig, dt_fine, dt_coarse, table, max_steps):
    n = x0.size
    m = out_sig.size
    X = np.empty((n, m))
    acc = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    for i in range(n):
        x = x0[i]
        sig = 0.0
        a = 0.0
        k = 0
        key = keys[i]
        failed = False
        spare = 0.0
        for j in range(m):
            target = out_sig[j]
            while sig < target:
                amp = np.sqrt(2.0 * kappa * _noise_factor_nb(model, p, sig))
                if model == 4:
                    b = _table_drift_nb(p, table, x, sig)
                else:
                    b = _drift_nb(model, p, x, sig)
                h = _step_nb(abs(x) - LAYER_WIDTHS * _layer_nb(model, p, sig), amp, abs(b),
                          dt_fine, dt_coarse)
                rem = target - sig
                land = h >= rem - 1e-12 * h
                if land:
                    h = rem
                if k & 1 == 0:
                    z, spare = normal_pair(key, np.uint64(k >> 1))
                else:
                    z = spare
                xn = x + b * h + amp * np.sqrt(h) * z
                if model == 3:
                    a += 0.5 * h * (_dphi_dt_nb(model, p, x, sig) + _dphi_dt_nb(model, p, xn, sig + h))
                x = xn
                sig = target if land else sig + h
                k += 1
                if k > max_steps:
                    failed = True
                    break
            if failed:
                break
            X[i, j] = x
        if failed:
            for j in range(m):
                X[i, j] = np.nan
            steps[i] = -1
        else:
            steps[i] = k
        acc[i] = a
    return X, acc, steps


def _run_numpy(model, p, kappa, x0, keys, out_sig, dt_fine, dt_coarse, table, max_steps):
    n = x0.size
    m = out_sig.size
    X = np.full((n, m), np.nan)
    acc = np.zeros(n)
    x = x0.astype(float).copy()
    sig = np.zeros(n)
    k = np.zeros(n, dtype=np.uint64)
    jout = np.zeros(n, dtype=np.int64)
    failed = np.zeros(n, dtype=bool)
    act = np.arange(n)
    while True:
        while act.size:
            hit = sig[act] >= out_sig[jout[act]]
            if not hit.any():
                break
            ih = act[hit]
            X[ih, jout[ih]] = x[ih]
            jout[ih] += 1
            act = act[jout[act] < m]
        over = k[act] > max_steps
        if over.any():
            failed[act[over]] = True
            act = act[~over]
        if act.size == 0:
            break
        xs, ss = x[act], sig[act]
        tgt = out_sig[jout[act]]
        amp = np.sqrt(2.0 * kappa * _noise_factor(model, p, ss))
        b = _table_drift_np(p, table, xs, ss) if model == 4 else _drift(model, p, xs, ss)
        h = _step(np.abs(xs) - LAYER_WIDTHS * _layer(model, p, ss), amp, np.abs(b), dt_fine, dt_coarse)
        rem = tgt - ss
        land = h >= rem - 1e-12 * h
        h = np.where(land, rem, h)
        z = normals(keys[act], k[act])
        xn = xs + b * h + amp * np.sqrt(h) * z
        if model == 3:
            acc[act] += 0.5 * h * (_dphi_dt(model, p, xs, ss) + _dphi_dt(model, p, xn, ss + h))
        x[act] = xn
        sig[act] = np.where(land, tgt, ss + h)
        k[act] += np.uint64(1)
    steps = k.astype(np.int64)
    steps[failed] = -1
    X[failed] = np.nan
    return X, acc, steps


_EMPTY_TABLE = np.zeros((2, 2))


def run_paths(model: int, p, kappa: float, x0, keys, out_sig, dt_fine: float, dt_coarse: float,
              table=None, max_steps: int = 50_000_000, jobs: int = 1, backend: str | None = None):
    """Integrate every path and record positions at the clock values ``out_sig``.

    Returns ``(X, acc, steps)``: positions of shape (n, len(out_sig)), the
    accumulated d phi/dt integral (model 3 only) and the step count per path
    (-1 where ``max_steps`` was exceeded).  Each path's noise depends only on
    its key, so splitting across ``jobs`` threads leaves results unchanged.
    """
    p = np.ascontiguousarray(p, dtype=float)
    x0 = np.ascontiguousarray(np.broadcast_to(np.asarray(x0, dtype=float), np.shape(keys)))
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    out_sig = np.ascontiguousarray(out_sig, dtype=float)
    if np.any(np.diff(out_sig) < 0) or (out_sig.size and out_sig[0] < 0):
        raise ValueError("output clock values must be non-negative and sorted")
    table = _EMPTY_TABLE if table is None else np.ascontiguousarray(table, dtype=float)
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    kern = _run_numba if backend == "numba" else _run_numpy
    args = (int(model), p, float(kappa))
    tail = (out_sig, float(dt_fine), float(dt_coarse), table, int(max_steps))
    n = keys.size
    if jobs <= 1 or n < 2 * jobs:
        return kern(*args, x0, keys, *tail)
    bounds = np.linspace(0, n, jobs + 1).astype(int)
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        parts = list(ex.map(lambda lo_hi: kern(*args, x0[lo_hi[0]:lo_hi[1]], keys[lo_hi[0]:lo_hi[1]], *tail),
                            zip(bounds[:-1], bounds[1:])))
    return (np.concatenate([q[0] for q in parts]), np.concatenate([q[1] for q in parts]),
            np.concatenate([q[2] for q in parts]))
