"""Entropy solutions of inviscid 1D Burgers.

The analytic kinds (Riemann, clipped ramp, sharp sawtooth) are handled in
closed form.  Everything else goes through the Lax-Oleinik variational
formula, and shocks are tracked through their Lagrangian end labels
``a_minus < a_plus``.  Those satisfy two equations at every time:

* both characteristics land on the shock, ``a_- + tau u0(a_-) = a_+ + tau u0(a_+)``;
* equal area, ``phi0(a_+) - phi0(a_-) = (a_+ - a_-) (u0(a_-) + u0(a_+)) / 2``.

Differentiating the pair in time gives the Rankine-Hugoniot speed, so the
tracker continues the pair with Newton's method instead of integrating
the shock ODE.  Mergers happen when neighbouring intervals touch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import MergeAmbiguous, MinimizerNotBracketed, RootNotConverged
from .initial import InitialVelocity

LABEL_TOL = 1e-10
N_SCAN_CELLS = 2048


class EvalResult(NamedTuple):
    left: float
    right: float
    mean: float
    at_shock: bool


def lagrangian_map(u0: InitialVelocity, a, t0: float, t: float):
    """Position at time ``t`` of the characteristic issued from label ``a``."""
    return np.asarray(a, dtype=float) + (t - t0) * u0.velocity(a)


def first_shock_time(u0: InitialVelocity, t0: float = 0.0) -> float:
    """t0 + 1/max(0, -u0') minimised over labels (t0 for compressive jumps)."""
    pts = u0.compression_points()
    if not pts:
        return math.inf
    steepest = min(d for _, d in pts)
    if steepest == -math.inf:
        return float(t0)
    return float(t0) + 1.0 / -steepest


# ---------------------------------------------------------------------------
# Lax-Oleinik minimisation
# ---------------------------------------------------------------------------

def _objective(u0, x, tau, a):
    return (x - a) ** 2 / (2.0 * tau) + u0.potential(a)


def lax_oleinik_minimizers(u0: InitialVelocity, x: float, tau: float,
                           window: tuple[float, float] | None = None,
                           n_cells: int = N_SCAN_CELLS):
    """All global minimisers of ``(x-a)^2/(2 tau) + phi0(a)``.

    Returns ``(labels, value)`` with labels sorted ascending.  More than one
    label means ``x`` sits on a shock.
    """
    if window is None:
        s = u0.speed_bound(x - 1.0, x + 1.0)
        reach = tau * s
        s = u0.speed_bound(x - reach - 1.0, x + reach + 1.0)
        reach = tau * s
        margin = 0.05 * reach + 1e-3 * u0.length_scale + 1e-9
        lo, hi = x - reach - margin, x + reach + margin
        strict = True
    else:
        lo, hi = window
        strict = False
    a = np.linspace(lo, hi, n_cells + 1)
    kinks = [k for k in u0.kinks() if lo < k < hi]
    if kinks:
        a = np.unique(np.concatenate([a, kinks]))
    F = _objective(u0, x, tau, a)
    i_best = int(np.argmin(F))
    if strict and (i_best == 0 or i_best == a.size - 1):
        raise MinimizerNotBracketed(f"minimiser at window edge for x={x}, tau={tau}")
    cand = [i for i in range(1, a.size - 1) if F[i] <= F[i - 1] and F[i] <= F[i + 1]]
    if not strict:
        if F[0] < F[1]:
            cand.append(0)
        if F[-1] < F[-2]:
            cand.append(a.size - 1)
    # only minima that can compete with the best grid value need refining
    spread = np.max(F) - np.min(F)
    cand = [i for i in cand if F[i] - F[i_best] <= 1e-3 * spread + 1e-12]

    def dF(z, side):
        return (z - x) / tau + float(u0.velocity(z, side))

    refined = []
    kink_arr = np.asarray(kinks)
    for i in cand:
        l, r = a[max(i - 1, 0)], a[min(i + 1, a.size - 1)]
        if kink_arr.size and np.any(np.isclose(kink_arr, a[i], rtol=0, atol=1e-15)) \
                and dF(a[i], -1) <= 0 <= dF(a[i], 1):
            z = float(a[i])
        else:
            fl, fr = dF(l, 1), dF(r, -1)
            if fl < 0 < fr:
                z = brentq(lambda q: dF(q, 0), l, r, xtol=1e-15, rtol=1e-15, maxiter=200)
            else:
                obj = lambda q: float(_objective(u0, x, tau, q))
                j0, j1 = max(i - 1, 0), min(i + 1, a.size - 1)
                if F[i] < min(F[j0], F[j1]):
                    res = minimize_scalar(obj, bracket=(l, a[i], r), method="golden",
                                          options={"xtol": 1e-14})
                else:
                    res = minimize_scalar(obj, bounds=(l, r), method="bounded",
                                          options={"xatol": 1e-14})
                z = float(res.x)
            for k in kinks:
                if abs(z - k) < 1e-12 * max(1.0, abs(k)):
                    z = float(k)
        refined.append((z, float(_objective(u0, x, tau, z))))
    if not refined:
        raise MinimizerNotBracketed(f"no interior minimum for x={x}")
    fmin = min(v for _, v in refined)
    scale = max(1.0, abs(fmin))
    tied = sorted({round(z, 13): z for z, v in refined if v - fmin <= 1e-10 * scale}.values())
    merged = [tied[0]]
    for z in tied[1:]:
        if z - merged[-1] > 1e-9 * max(1.0, abs(z)):
            merged.append(z)
    return merged, fmin


# ---------------------------------------------------------------------------
# Shock records and trees
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ShockRecord:
    """One shock segment: born at ``t_star`` (formation or merger), alive
    until ``t_end`` (a merger into ``parent`` or the horizon)."""

    id: int
    t_star: float
    t_end: float
    initial: InitialVelocity
    t0: float
    endpoints: Callable[[float], tuple[float, float]]
    parent: int | None = None
    children: list[int] = field(default_factory=list)

    def alive(self, t: float) -> bool:
        if self.parent is None:
            return self.t_star <= t <= self.t_end
        return self.t_star <= t < self.t_end

    def interval(self, t: float) -> tuple[float, float]:
        if t < self.t_star - 1e-14 or t > self.t_end + 1e-14:
            raise ValueError(f"shock {self.id} not alive at t={t}")
        return self.endpoints(float(t))

    def intervals(self, ts) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint labels at an array of times."""
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < self.t_star - 1e-14) or np.any(ts > self.t_end + 1e-14):
            raise ValueError(f"shock {self.id} not alive at all requested times")
        many = getattr(self.endpoints, "many", None)
        if many is not None:
            return many(ts)
        out = np.array([self.endpoints(float(t)) for t in ts]).reshape(-1, 2)
        return out[:, 0], out[:, 1]

    def u_minus(self, t):
        a, _ = self.interval(t)
        return float(self.initial.velocity(a, -1))

    def u_plus(self, t):
        _, b = self.interval(t)
        return float(self.initial.velocity(b, 1))

    def u_star(self, t):
        return 0.5 * (self.u_minus(t) + self.u_plus(t))

    def position(self, t):
        a, _ = self.interval(t)
        return float(a + (t - self.t0) * self.initial.velocity(a, -1))

    def grad_minus(self, t):
        """Eulerian gradient u_x just left of the shock."""
        a, _ = self.interval(t)
        d = float(self.initial.derivative(a, -1))
        return d / (1.0 + (t - self.t0) * d)

    def grad_plus(self, t):
        _, b = self.interval(t)
        d = float(self.initial.derivative(b, 1))
        return d / (1.0 + (t - self.t0) * d)


@dataclass(eq=False)
class ShockTree:
    segments: list[ShockRecord]
    mergers: list[tuple[float, tuple[int, ...], int]]
    formation_points: list[tuple[float, int]]
    horizon: tuple[float, float]

    def by_id(self, sid: int) -> ShockRecord:
        return self.segments[sid]

    def alive(self, t: float) -> list[ShockRecord]:
        out = [s for s in self.segments if s.alive(t)]
        return sorted(out, key=lambda s: s.interval(t)[0])

    def roots(self) -> list[ShockRecord]:
        return [s for s in self.segments if s.parent is None]

    def descendants(self, sid: int) -> list[int]:
        out, stack = [], [sid]
        while stack:
            k = stack.pop()
            out.append(k)
            stack.extend(self.segments[k].children)
        return out

    def root_of(self, sid: int) -> int:
        while self.segments[sid].parent is not None:
            sid = self.segments[sid].parent
        return sid

    def event_times(self) -> list[float]:
        return sorted({t for t, _ in self.formation_points} | {t for t, _, _ in self.mergers})


# ---------------------------------------------------------------------------
# endpoint solver for non-analytic data
# ---------------------------------------------------------------------------

_GL3_X, _GL3_W = np.polynomial.legendre.leggauss(3)
_CHORD_DIRECT = 0.1


def _chord_area(u0: InitialVelocity, a, b):
    """int_a^b u0 - (b - a)(u0(a) + u0(b))/2 and its rounding scale.

    For short intervals of sampled data the deviation from the chord is
    integrated piece by piece (exact on cubics), which avoids subtracting two
    O(1) potentials to get an O(w^3) result.
    """
    a_arr, b_arr = np.atleast_1d(np.asarray(a, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float))
    ua, ub = u0.velocity(a_arr), u0.velocity(b_arr)
    pa, pb = u0.potential(a_arr), u0.potential(b_arr)
    w = b_arr - a_arr
    out = (pb - pa) - 0.5 * w * (ua + ub)
    scale = np.abs(pa) + np.abs(pb) + np.abs(w) * (np.abs(ua) + np.abs(ub))
    if u0.kind == "smooth_sampled":
        g = u0._grid
        sel = np.nonzero((w < _CHORD_DIRECT) & (w > 0))[0]
        if sel.size:
            lo, hi = a_arr[sel], b_arr[sel]
            K = int(np.ceil(_CHORD_DIRECT / np.min(np.diff(g)))) + 2
            first = np.searchsorted(g, lo, side="right")
            inner = g[np.clip(first[:, None] + np.arange(K)[None, :], 0, g.size - 1)]
            inner = np.clip(inner, lo[:, None], hi[:, None])
            edges = np.concatenate([lo[:, None], inner, hi[:, None]], axis=1)
            mid, half = 0.5 * (edges[:, 1:] + edges[:, :-1]), 0.5 * np.diff(edges, axis=1)
            nodes = mid[..., None] + half[..., None] * _GL3_X
            ws = w[sel][:, None, None]
            chord = ua[sel][:, None, None] + (ub[sel] - ua[sel])[:, None, None] * (nodes - lo[:, None, None]) / ws
            dev = u0.velocity(nodes.ravel()).reshape(nodes.shape) - chord
            out[sel] = np.sum(half * (dev @ _GL3_W), axis=1)
            scale[sel] = w[sel] * (np.abs(ua[sel]) + np.abs(ub[sel]))
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(out[0]), float(scale[0])
    return out, scale


def _endpoint_residual(u0, tau, a, b):
    ua, ub = float(u0.velocity(a)), float(u0.velocity(b))
    f1 = (b + tau * ub) - (a + tau * ua)
    f2, _ = _chord_area(u0, a, b)
    return f1, f2, ua, ub


def solve_endpoints(u0: InitialVelocity, tau: float, a: float, b: float,
                    tol: float = 1e-14, maxit: int = 60) -> tuple[float, float, int]:
    """Newton iteration for the shock end labels at elapsed time ``tau``."""
    scale = max(1.0, abs(a), abs(b))
    for it in range(maxit):
        f1, f2, ua, ub = _endpoint_residual(u0, tau, a, b)
        da, db = float(u0.derivative(a)), float(u0.derivative(b))
        w = b - a
        J = np.array([[-(1.0 + tau * da), 1.0 + tau * db],
                      [0.5 * (ub - ua) - 0.5 * w * da, 0.5 * (ub - ua) - 0.5 * w * db]])
        try:
            step = np.linalg.solve(J, [-f1, -f2])
        except np.linalg.LinAlgError:
            raise RootNotConverged("singular endpoint Jacobian") from None
        lam = 1.0
        # keep the interval from collapsing onto the trivial root a == b
        while lam > 1e-4 and (b + lam * step[1]) - (a + lam * step[0]) < 0.5 * w:
            lam *= 0.5
        a += lam * step[0]
        b += lam * step[1]
        if max(abs(step[0]), abs(step[1])) * lam < tol * scale:
            return a, b, it + 1
        # near formation the Jacobian is O(width^2): accept roundoff-level residuals
        eps = 8 * np.finfo(float).eps
        r1, r2, ua, ub = _endpoint_residual(u0, tau, a, b)
        s1 = abs(a) + abs(b) + tau * (abs(ua) + abs(ub))
        _, s2 = _chord_area(u0, a, b)
        if abs(r1) <= eps * s1 and abs(r2) <= eps * s2 and lam == 1.0:
            return a, b, it + 1
    raise RootNotConverged(f"endpoint Newton did not converge at tau={tau}")


def _solve_endpoints_many(u0, tau, a, b, tol=1e-14, maxit=60):
    """Elementwise version of ``solve_endpoints`` for arrays of times."""
    a, b, tau = a.copy(), b.copy(), np.asarray(tau, dtype=float)
    active = np.ones(a.size, dtype=bool)
    eps = 8 * np.finfo(float).eps
    for _ in range(maxit):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            return a, b
        A, B, T = a[idx], b[idx], tau[idx]
        ua, ub = u0.velocity(A), u0.velocity(B)
        f1 = (B + T * ub) - (A + T * ua)
        f2, _ = _chord_area(u0, A, B)
        da, db = u0.derivative(A), u0.derivative(B)
        w = B - A
        j11, j12 = -(1.0 + T * da), 1.0 + T * db
        j21, j22 = 0.5 * (ub - ua) - 0.5 * w * da, 0.5 * (ub - ua) - 0.5 * w * db
        det = j11 * j22 - j12 * j21
        if np.any(det == 0):
            raise RootNotConverged("singular endpoint Jacobian")
        sa = (-f1 * j22 + f2 * j12) / det
        sb = (-f2 * j11 + f1 * j21) / det
        lam = np.ones(idx.size)
        for _ in range(14):
            bad = (B + lam * sb) - (A + lam * sa) < 0.5 * w
            if not bad.any():
                break
            lam[bad] *= 0.5
        A = A + lam * sa
        B = B + lam * sb
        a[idx], b[idx] = A, B
        scale = np.maximum(1.0, np.maximum(np.abs(A), np.abs(B)))
        done = np.maximum(np.abs(sa), np.abs(sb)) * lam < tol * scale
        ua, ub = u0.velocity(A), u0.velocity(B)
        r1 = (B + T * ub) - (A + T * ua)
        r2, s2 = _chord_area(u0, A, B)
        s1 = np.abs(A) + np.abs(B) + T * (np.abs(ua) + np.abs(ub))
        done |= (np.abs(r1) <= eps * s1) & (np.abs(r2) <= eps * s2) & (lam == 1.0)
        active[idx[done]] = False
    if active.any():
        raise RootNotConverged("endpoint Newton did not converge for some times")
    return a, b


def _local_tie(u0: InitialVelocity, tau: float, a_c: float, halfwidth: float):
    """Locate a freshly formed shock near label ``a_c`` by bisection on x.

    The minimiser of the Lax-Oleinik objective restricted to labels near
    ``a_c`` jumps across ``a_c`` exactly at the shock position.
    """
    win = (a_c - halfwidth, a_c + halfwidth)

    def side(xq):
        labels, _ = lax_oleinik_minimizers(u0, xq, tau, window=win, n_cells=4096)
        return labels

    x_c = a_c + tau * float(u0.velocity(a_c))
    delta = 1e-6 * max(1.0, abs(x_c))
    lo, hi = x_c - delta, x_c + delta
    for _ in range(60):
        if side(lo)[0] < a_c:
            break
        lo -= delta
        delta *= 2
    delta = 1e-6 * max(1.0, abs(x_c))
    for _ in range(60):
        if side(hi)[-1] > a_c:
            break
        hi += delta
        delta *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        labs = side(mid)
        if len(labs) > 1 and labs[0] < a_c < labs[-1]:
            lo = hi = mid
            break
        if labs[0] < a_c:
            lo = mid
        else:
            hi = mid
    a_minus = min(side(lo))
    a_plus = max(side(hi))
    return a_minus, a_plus


class _TrackedEndpoints:
    """Endpoint provider backed by a continuation table plus Newton polish."""

    def __init__(self, u0, t0, t_star, a_star, ts, as_, bs):
        self.u0, self.t0 = u0, t0
        self.t_star, self.a_star = t_star, a_star
        self.ts = np.asarray(ts, dtype=float)
        self.as_ = np.asarray(as_, dtype=float)
        self.bs = np.asarray(bs, dtype=float)
        self._cache: dict[float, tuple[float, float]] = {}
        self.fresh = a_star is not None
        self._local = None
        if self.fresh and u0.kind == "smooth_sampled":
            lo, hi, c = u0.piece(a_star)
            if c[0] > 0 and lo < a_star < hi:
                self._local = (lo, hi, float(c[0]), float(u0.derivative(a_star)))

    def in_piece_half_width(self, ts, since_formation=None) -> np.ndarray:
        """Half-width h where the exact single-piece law applies, NaN elsewhere.

        ``since_formation`` may carry t - t_star exactly when it is known more
        precisely than the difference of the two times.
        """
        t = np.asarray(ts, dtype=float)
        out = np.full(t.shape, np.nan)
        if self._local is None:
            return out
        lo, hi, c3, d = self._local
        tau = t - self.t0
        dt = t - self.t_star if since_formation is None else np.asarray(since_formation, dtype=float)
        h = np.sqrt(np.clip(-dt * d / (tau * c3), 0.0, None))
        ok = (dt > 0) & (self.a_star - h >= lo) & (self.a_star + h <= hi)
        out[ok] = h[ok]
        return out

    def _in_piece(self, t):
        """Exact endpoints while both stay in the cubic piece of the formation point.

        On a single cubic the equal-area condition puts the midpoint on the
        inflection point a*, and the characteristic condition then gives
        h^2 = -(tau - tau*) u0'(a*) / (tau c3).
        """
        lo, hi, c3, d = self._local
        tau, tau_s = t - self.t0, self.t_star - self.t0
        h = math.sqrt(max(-(tau - tau_s) * d / (tau * c3), 0.0))
        a, b = self.a_star - h, self.a_star + h
        if lo <= a and b <= hi:
            return a, b
        return None

    def __call__(self, t):
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        ts = self.ts
        if self.fresh and t <= ts[0]:
            if t <= self.t_star:
                return (self.a_star, self.a_star)
            if self._local is not None:
                exact = self._in_piece(t)
                if exact is not None:
                    return exact
            # square-root growth away from the formation point, then Newton
            r = math.sqrt((t - self.t_star) / (ts[0] - self.t_star))
            ga = self.a_star + r * (self.as_[0] - self.a_star)
            gb = self.a_star + r * (self.bs[0] - self.a_star)
            out = (ga, gb)
            try:
                a, b, _ = solve_endpoints(self.u0, t - self.t0, ga, gb)
                if 0.5 < (b - a) / (gb - ga) < 2.0:
                    out = (a, b)
            except RootNotConverged:
                pass
            return out
        j = int(np.searchsorted(ts, t))
        if j < ts.size and ts[j] == t:
            out = (float(self.as_[j]), float(self.bs[j]))
        else:
            j = min(max(j, 1), ts.size - 1)
            w = (t - ts[j - 1]) / (ts[j] - ts[j - 1])
            ga = self.as_[j - 1] + w * (self.as_[j] - self.as_[j - 1])
            gb = self.bs[j - 1] + w * (self.bs[j] - self.bs[j - 1])
            a, b, _ = solve_endpoints(self.u0, t - self.t0, float(ga), float(gb))
            out = (a, b)
        if len(self._cache) < 100000:
            self._cache[t] = out
        return out

    def many(self, ts):
        """Vectorised endpoints at an array of times (same answers as ``__call__``)."""
        t = np.asarray(ts, dtype=float)
        a = np.interp(t, self.ts, self.as_)
        b = np.interp(t, self.ts, self.bs)
        exact = np.isin(t, self.ts)
        polish = ~exact
        if self.fresh:
            early = t <= self.ts[0]
            r = np.sqrt(np.clip((t - self.t_star) / (self.ts[0] - self.t_star), 0.0, None))
            a = np.where(early, self.a_star + r * (self.as_[0] - self.a_star), a)
            b = np.where(early, self.a_star + r * (self.bs[0] - self.a_star), b)
            polish &= ~early
            young = early & (t > self.t_star)
            if self._local is not None and young.any():
                lo, hi, c3, d = self._local
                tau, tau_s = t - self.t0, self.t_star - self.t0
                h = np.sqrt(np.clip(-(tau - tau_s) * d / (tau * c3), 0.0, None))
                inside = young & (self.a_star - h >= lo) & (self.a_star + h <= hi)
                a = np.where(inside, self.a_star - h, a)
                b = np.where(inside, self.a_star + h, b)
                young &= ~inside
            idx = np.nonzero(young)[0]
            if idx.size:
                try:
                    na, nb = _solve_endpoints_many(self.u0, t[idx] - self.t0, a[idx], b[idx])
                    good = (0.5 < (nb - na) / (b[idx] - a[idx])) & ((nb - na) / (b[idx] - a[idx]) < 2.0)
                    a[idx[good]], b[idx[good]] = na[good], nb[good]
                except RootNotConverged:
                    for i in idx:
                        a[i], b[i] = self(float(t[i]))
        if polish.any():
            a[polish], b[polish] = _solve_endpoints_many(self.u0, t[polish] - self.t0, a[polish], b[polish])
        return a, b


class _Live:
    __slots__ = ("id", "t_star", "a_star", "ts", "as_", "bs", "fresh")

    def __init__(self, sid, t_star, a_star, fresh):
        self.id, self.t_star, self.a_star, self.fresh = sid, t_star, a_star, fresh
        self.ts, self.as_, self.bs = [], [], []

    def last(self):
        return self.as_[-1], self.bs[-1]


def _track(u0: InitialVelocity, t0: float, tf: float) -> ShockTree:
    scale = u0.length_scale
    cands = []
    for a_c, d in u0.compression_points():
        t_c = t0 + 1.0 / -d
        if t_c < tf:
            cands.append((t_c, a_c))
    cands.sort()
    # PCHIP derivatives can carry shallow duplicate minima; keep the deepest per cluster
    kept = []
    for t_c, a_c in cands:
        if all(abs(a_c - a_k) > 0.02 * scale for _, a_k in kept):
            kept.append((t_c, a_c))
    cands = kept
    records: list[dict] = []
    mergers, formations = [], []
    live: list[_Live] = []
    if not cands:
        return ShockTree([], [], [], (t0, tf))

    h_max = (tf - t0) / 400.0
    h_min = 1e-12 * max(1.0, tf - t0)
    t = cands[0][0]
    h = h_max

    def new_record(t_star, a_star, fresh, children=()):
        sid = len(records)
        records.append({"id": sid, "t_star": t_star, "a_star": a_star, "children": list(children),
                        "parent": None, "t_end": tf})
        lv = _Live(sid, t_star, a_star, fresh)
        return lv

    def advance(lv: _Live, t_new):
        tau = t_new - t0
        if lv.fresh:
            a_lo, b_hi = _local_tie(u0, tau, lv.a_star, halfwidth=0.25 * scale)
            a, b, it = solve_endpoints(u0, tau, a_lo, b_hi)
            return a, b, it
        a_prev, b_prev = lv.last()
        if len(lv.ts) >= 2 and lv.ts[-1] > lv.ts[-2]:
            w = (t_new - lv.ts[-1]) / (lv.ts[-1] - lv.ts[-2])
            ga = a_prev + w * (a_prev - lv.as_[-2])
            gb = b_prev + w * (b_prev - lv.bs[-2])
            if gb - ga <= 0.5 * (b_prev - a_prev):
                ga, gb = a_prev, b_prev
        else:
            ga, gb = a_prev, b_prev
        a, b, it = solve_endpoints(u0, tau, ga, gb)
        return a, b, it

    def spawn_due(t_now):
        nonlocal cands
        while cands and cands[0][0] <= t_now + 1e-15:
            t_c, a_c = cands.pop(0)
            absorbed = any(lv.last()[0] - LABEL_TOL <= a_c <= lv.last()[1] + LABEL_TOL
                           for lv in live if lv.ts)
            if absorbed:
                continue
            lv = new_record(t_c, a_c, fresh=True)
            live.append(lv)
            formations.append((t_c, lv.id))

    spawn_due(t)
    h = 1e-4 * max(t - t0, 1e-3)
    while t < tf - 1e-15:
        t_form = cands[0][0] if cands else math.inf
        step = min(h, tf - t, t_form - t)
        if step <= 0:
            spawn_due(t)
            continue
        t_new = t + step
        try:
            states = {lv.id: advance(lv, t_new) for lv in live}
        except RootNotConverged:
            if step <= h_min:
                raise
            h = 0.5 * step
            continue
        # reject steps where an interval changes too abruptly
        bad = False
        for lv in live:
            if lv.fresh:
                continue
            a0, b0 = lv.last()
            a1, b1, _ = states[lv.id]
            w0 = b0 - a0
            if abs(a1 - a0) > 0.25 * w0 + 1e-3 * scale or abs(b1 - b0) > 0.25 * w0 + 1e-3 * scale:
                bad = True
        if bad and step > h_min:
            h = 0.5 * step
            continue
        order = sorted(live, key=lambda lv: states[lv.id][0])
        overlaps = [(order[i], order[i + 1]) for i in range(len(order) - 1)
                    if states[order[i].id][1] >= states[order[i + 1].id][0]]
        if overlaps:
            # locate the earliest contact time in (t, t_new]
            def gap(tq, left, right):
                la = _TrackedEndpoints(u0, t0, left.t_star, None, left.ts, left.as_, left.bs)
                ra = _TrackedEndpoints(u0, t0, right.t_star, None, right.ts, right.as_, right.bs)
                la.ts = np.append(la.ts, t_new)
                la.as_ = np.append(la.as_, states[left.id][0])
                la.bs = np.append(la.bs, states[left.id][1])
                ra.ts = np.append(ra.ts, t_new)
                ra.as_ = np.append(ra.as_, states[right.id][0])
                ra.bs = np.append(ra.bs, states[right.id][1])
                return ra(tq)[0] - la(tq)[1]

            times = []
            for left, right in overlaps:
                if left.fresh or right.fresh:
                    times.append((t_new, left, right))
                    continue
                g0 = left.last()[1] - right.last()[0]
                if g0 >= 0:
                    raise MergeAmbiguous(f"shocks {left.id},{right.id} already overlap at t={t}")
                tm = brentq(lambda q: gap(q, left, right), t, t_new, xtol=1e-14, rtol=1e-15)
                times.append((tm, left, right))
            times.sort(key=lambda z: z[0])
            t_m = times[0][0]
            group = [z for z in times if z[0] - t_m <= 1e-9 * max(1.0, t_m)]
            if len(group) < len(times) and times[len(group)][0] - t_m < h_min:
                raise MergeAmbiguous(f"distinct mergers within the minimum step near t={t_m}")
            # advance every live shock to t_m
            st_m = {}
            for lv in live:
                a_g = lv.last()[0] + (states[lv.id][0] - lv.last()[0]) * (t_m - t) / step
                b_g = lv.last()[1] + (states[lv.id][1] - lv.last()[1]) * (t_m - t) / step
                st_m[lv.id] = solve_endpoints(u0, t_m - t0, a_g, b_g)[:2] if not lv.fresh \
                    else states[lv.id][:2]
            for lv in live:
                lv.ts.append(t_m)
                lv.as_.append(st_m[lv.id][0])
                lv.bs.append(st_m[lv.id][1])
                lv.fresh = False
            merged_ids = set()
            chains = []
            for _, left, right in group:
                for ch in chains:
                    if ch[-1] is left:
                        ch.append(right)
                        break
                else:
                    chains.append([left, right])
            for ch in chains:
                ids = [c.id for c in ch]
                merged_ids.update(ids)
                a_new = min(st_m[i][0] for i in ids)
                b_new = max(st_m[i][1] for i in ids)
                parent = new_record(t_m, None, fresh=False, children=ids)
                parent.ts.append(t_m)
                parent.as_.append(a_new)
                parent.bs.append(b_new)
                for i in ids:
                    records[i]["parent"] = parent.id
                    records[i]["t_end"] = t_m
                mergers.append((t_m, tuple(ids), parent.id))
                live.append(parent)
            finished = [lv for lv in live if lv.id in merged_ids]
            for lv in finished:
                records[lv.id]["live"] = lv
            live = [lv for lv in live if lv.id not in merged_ids]
            t = t_m
            h = max(step * 1e-3, 1e-6 * max(t - t0, 1e-3))
            spawn_due(t)
            if any(lv.fresh for lv in live):
                h = 1e-4 * max(t - t0, 1e-3)
            continue
        max_it = 0
        for lv in live:
            a1, b1, it = states[lv.id]
            lv.ts.append(t_new)
            lv.as_.append(a1)
            lv.bs.append(b1)
            lv.fresh = False
            max_it = max(max_it, it)
        t = t_new
        h = min(h_max, step * (1.5 if max_it <= 6 else 1.0))
        spawn_due(t)
        if any(lv.fresh for lv in live):
            h = 1e-4 * max(t - t0, 1e-3)
    for lv in live:
        records[lv.id]["live"] = lv

    segments = []
    for rec in records:
        lv: _Live = rec["live"]
        ep = _TrackedEndpoints(u0, t0, rec["t_star"], rec["a_star"], lv.ts, lv.as_, lv.bs)
        segments.append(ShockRecord(rec["id"], rec["t_star"], rec["t_end"], u0, t0, ep,
                                    parent=rec["parent"], children=rec["children"]))
    return ShockTree(segments, mergers, formations, (t0, tf))


# ---------------------------------------------------------------------------
# solution object
# ---------------------------------------------------------------------------

class EntropySolution:
    """The entropy solution issued from ``initial`` at time ``t0``.

    ``tf`` bounds the tracked window for non-analytic data; analytic kinds
    are valid for all ``t >= t0``.
    """

    def __init__(self, initial: InitialVelocity, t0: float | None = None, tf: float | None = None):
        if initial.kind == "sawtooth":
            t_ref = float(initial.parameters["t_ref"])
            if t0 is None:
                t0 = t_ref
            if abs(t0 - t_ref) > 1e-15 * t_ref:
                from .errors import ConfigInvalid

                raise ConfigInvalid("sawtooth data is defined at t_ref; use t0 = t_ref > 0")
        self.initial = initial
        self.t0 = float(0.0 if t0 is None else t0)
        self.closed_form = initial.is_closed_form
        if self.closed_form:
            self.tf = math.inf if tf is None else float(tf)
            self.tree = self._analytic_tree()
        else:
            if tf is None:
                raise ValueError("tf is required for tracked (non-analytic) data")
            self.tf = float(tf)
            self.tree = _track(initial, self.t0, self.tf)

    # -- analytic shock trees ---------------------------------------------
    def _analytic_tree(self) -> ShockTree:
        u0, t0, tf = self.initial, self.t0, self.tf
        p = u0.parameters
        if u0.kind == "riemann":
            um, up = float(p["u_minus"]), float(p["u_plus"])
            if um <= up:
                return ShockTree([], [], [], (t0, tf))

            def ep(t):
                tau = t - t0
                return (0.5 * tau * (up - um), 0.5 * tau * (um - up))
            t_star = t0
        elif u0.kind == "linear_ramp":
            k, A = float(p["slope"]), float(p.get("half_width", 1.0))
            if k >= 0:
                return ShockTree([], [], [], (t0, tf))
            t_star = t0 + 1.0 / -k

            def ep(t):
                w = A * max(-k * (t - t0), 1.0)
                return (-w, w)
        else:
            L, tr = float(p["L"]), float(p["t_ref"])
            t_star = t0

            def ep(t):
                w = L * (1.0 - tr / t)
                return (-w, w)
        rec = ShockRecord(0, t_star, tf, u0, t0, ep)
        return ShockTree([rec], [], [(t_star, 0)], (t0, tf))

    # -- queries --------------------------------------------------------------
    def shocks_at(self, t: float) -> list[ShockRecord]:
        return self.tree.alive(t)

    def shock(self, sid: int) -> ShockRecord:
        return self.tree.by_id(sid)

    def evaluate(self, x: float, t: float, method: str = "auto") -> EvalResult:
        if t < self.t0:
            raise ValueError("t must be >= t0")
        x = float(x)
        tau = t - self.t0
        if tau == 0.0:
            left = float(self.initial.velocity(x, -1))
            right = float(self.initial.velocity(x, 1))
            return EvalResult(left, right, 0.5 * (left + right), left > right)
        if self.closed_form and method == "auto":
            return self._evaluate_closed(x, t)
        labels, _ = lax_oleinik_minimizers(self.initial, x, tau)
        left = (x - labels[0]) / tau
        right = (x - labels[-1]) / tau
        if len(labels) == 1:
            v = float(self.initial.velocity(labels[0]))
            # kink minimisers (rarefaction fans) carry the slope value
            if any(abs(labels[0] - k) < 1e-12 for k in self.initial.kinks()):
                v = left
            return EvalResult(v, v, v, False)
        return EvalResult(left, right, 0.5 * (left + right), True)

    def _evaluate_closed(self, x, t) -> EvalResult:
        u0, tau = self.initial, t - self.t0
        p = u0.parameters

        def tol(xs):
            return 1e-12 * max(1.0, abs(xs), abs(x))

        if u0.kind == "riemann":
            um, up = float(p["u_minus"]), float(p["u_plus"])
            if um > up:
                xs = 0.5 * tau * (um + up)
                if abs(x - xs) <= tol(xs):
                    return EvalResult(um, up, 0.5 * (um + up), True)
                v = um if x < xs else up
                return EvalResult(v, v, v, False)
            v = um if x <= um * tau else up if x >= up * tau else x / tau
            return EvalResult(v, v, v, False)
        if u0.kind == "linear_ramp":
            k, A = float(p["slope"]), float(p.get("half_width", 1.0))
            c = 1.0 + k * tau
            if k < 0 and c <= 0:
                if abs(x) <= tol(0.0):
                    return EvalResult(-k * A, k * A, 0.0, True)
                v = -k * A if x < 0 else k * A
                return EvalResult(v, v, v, False)
            if abs(x) <= A * c:
                v = k * x / c
            else:
                v = k * A * (1.0 if x > 0 else -1.0)
            return EvalResult(v, v, v, False)
        L = float(p["L"])
        if abs(x) <= tol(0.0):
            return EvalResult(L / t, -L / t, 0.0, True)
        v = (x - L * math.copysign(1.0, x)) / t
        return EvalResult(v, v, v, False)

    def velocity(self, x, t):
        """Vectorised mean velocity u-bar(x, t)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([self.evaluate(xi, t).mean for xi in x])

    def back_label(self, x: float, t: float) -> float:
        """Label of the characteristic reaching a regular point (x, t)."""
        return float(x - (t - self.t0) * self.evaluate(x, t).mean)

    def shock_interval(self, shock_id: int, t: float) -> tuple[float, float]:
        return self.tree.by_id(shock_id).interval(t)

    def event_near(self, t: float, tol: float = 1e-9) -> bool:
        return any(abs(t - te) <= tol * max(1.0, abs(te)) for te in self.tree.event_times())

    def to_csv_rows(self, xs, ts):
        rows = []
        for t in ts:
            for x in xs:
                r = self.evaluate(x, t)
                rows.append((float(x), float(t), r.left, r.right, int(r.at_shock)))
        return rows


def shock_interval(sol: EntropySolution, shock_id: int, t: float) -> tuple[float, float]:
    return sol.shock_interval(shock_id, t)


def evaluate(sol: EntropySolution, x: float, t: float) -> EvalResult:
    return sol.evaluate(x, t)


def build_shock_tree(u0: InitialVelocity, t0: float, tf: float) -> ShockTree:
    return EntropySolution(u0, t0, tf).tree
