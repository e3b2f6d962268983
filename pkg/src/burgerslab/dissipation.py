"""Entropy pairs and dissipation anomalies at shocks.

Three routes to the same rate are provided so they can be checked against
each other:

* ``lagrangian_anomaly``: the accumulated change I_psi(t) - I_psi(t0) from
  the label intervals that have fallen into shocks;
* ``instantaneous_rate``: label-space quadrature of the uniformised shock
  interval, split into a jump part and a Bregman part;
* ``eulerian_rate``: the one-sided flux formula u*(psi(u-) - psi(u+)) - (J(u-) - J(u+)).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.optimize import brentq

from .entropy_core import EntropySolution
from .errors import QuadratureFail, ShockEventAtT

QUAD_ABS = 1e-10
QUAD_REL = 1e-8


@dataclass(frozen=True, eq=False)
class EntropyPair:
    """A convex entropy psi with derivative and flux J(u) = int u psi'(u) du.

    ``psi_prime(u, direction)`` returns the one-sided derivative on the side
    of ``direction`` where psi has a kink.  ``psi_integral`` is an
    antiderivative of psi used for exact integrals over velocity ranges.
    """

    name: str
    psi: Callable
    psi_prime_raw: Callable
    flux_J: Callable
    psi_integral: Callable
    kinks: tuple = ()

    def psi_prime(self, u, direction=0.0):
        u = np.asarray(u, dtype=float)
        d = self.psi_prime_raw(u)
        if self.kinks:
            direction = np.broadcast_to(np.asarray(direction, dtype=float), u.shape)
            for k in self.kinks:
                at = u == k
                if np.any(at):
                    h = 1e-7 * max(1.0, abs(k))
                    right = self.psi_prime_raw(np.full(u.shape, k + h))
                    left = self.psi_prime_raw(np.full(u.shape, k - h))
                    d = np.where(at & (direction > 0), right, d)
                    d = np.where(at & (direction < 0), left, d)
        return d

    @classmethod
    def builtin(cls, name: str) -> "EntropyPair":
        if name not in _BUILTINS:
            raise KeyError(f"unknown entropy {name!r}; choose from {sorted(_BUILTINS)}")
        return _BUILTINS[name]

    @classmethod
    def from_callable(cls, name, psi, psi_prime, kinks=()):
        """Pair from user functions; the psi antiderivative by quadrature."""

        def Psi(u):
            u = np.asarray(u, dtype=float)
            f = np.vectorize(lambda v: quad(lambda w: float(psi(w)), 0.0, v,
                                            epsabs=1e-13, epsrel=1e-12, limit=200)[0])
            return f(u)

        # integration by parts: int_0^u w psi'(w) dw = u psi(u) - int_0^u psi
        def J(u):
            u = np.asarray(u, dtype=float)
            return u * psi(u) - Psi(u)

        return cls(name, psi, psi_prime, J, Psi, tuple(kinks))

    @classmethod
    def sampled(cls, name, u_grid, psi_values):
        """Pair from samples of a convex function (cubic spline, checked convex)."""
        from scipy.interpolate import CubicSpline

        sp = CubicSpline(np.asarray(u_grid, float), np.asarray(psi_values, float))
        grid = np.linspace(u_grid[0], u_grid[-1], 257)
        curv = sp(grid, 2)
        if np.any(curv < -1e-9 * max(1.0, float(np.max(np.abs(curv))))):
            raise ValueError("sampled entropy is not convex")
        anti = sp.antiderivative()
        zero = float(anti(0.0))

        def Psi(u):
            return anti(u) - zero

        return cls(name, lambda u: sp(u), lambda u: sp(u, 1),
                   lambda u: np.asarray(u, float) * sp(u) - Psi(u), Psi)

    def integral(self, lo, hi):
        """int_lo^hi psi(u) du."""
        return float(self.psi_integral(hi) - self.psi_integral(lo))


_BUILTINS = {
    "momentum": EntropyPair("momentum", lambda u: np.asarray(u, float) * 1.0,
                            lambda u: np.ones_like(np.asarray(u, float)),
                            lambda u: 0.5 * np.asarray(u, float) ** 2,
                            lambda u: 0.5 * np.asarray(u, float) ** 2),
    "neg_momentum": EntropyPair("neg_momentum", lambda u: -np.asarray(u, float),
                                lambda u: -np.ones_like(np.asarray(u, float)),
                                lambda u: -0.5 * np.asarray(u, float) ** 2,
                                lambda u: -0.5 * np.asarray(u, float) ** 2),
    "energy": EntropyPair("energy", lambda u: 0.5 * np.asarray(u, float) ** 2,
                          lambda u: np.asarray(u, float) * 1.0,
                          lambda u: np.asarray(u, float) ** 3 / 3.0,
                          lambda u: np.asarray(u, float) ** 3 / 6.0),
    "square": EntropyPair("square", lambda u: np.asarray(u, float) ** 2,
                          lambda u: 2.0 * np.asarray(u, float),
                          lambda u: 2.0 * np.asarray(u, float) ** 3 / 3.0,
                          lambda u: np.asarray(u, float) ** 3 / 3.0),
    "quartic": EntropyPair("quartic", lambda u: np.asarray(u, float) ** 4,
                           lambda u: 4.0 * np.asarray(u, float) ** 3,
                           lambda u: 0.8 * np.asarray(u, float) ** 5,
                           lambda u: np.asarray(u, float) ** 5 / 5.0),
    "abs": EntropyPair("abs", lambda u: np.abs(np.asarray(u, float)),
                       lambda u: np.sign(np.asarray(u, float)),
                       lambda u: 0.5 * np.asarray(u, float) * np.abs(np.asarray(u, float)),
                       lambda u: 0.5 * np.asarray(u, float) * np.abs(np.asarray(u, float)),
                       kinks=(0.0,)),
}


def bregman(pair: EntropyPair, u_star, u):
    """psi(u*) - psi(u) - psi'(u)(u* - u), sub-gradient taken toward u*."""
    u_star = np.asarray(u_star, dtype=float)
    u = np.asarray(u, dtype=float)
    d = pair.psi_prime(u, direction=u_star - u)
    out = pair.psi(u_star) - pair.psi(u) - d * (u_star - u)
    return out if out.ndim else float(out)


@dataclass
class AnomalyReport:
    per_shock: list[tuple[int, float]] = field(default_factory=list)
    total: float = 0.0
    decomposition: list[tuple[int, float, float]] = field(default_factory=list)
    max_bregman: list[tuple[int, float]] = field(default_factory=list)

    def to_json(self) -> str:
        rows = []
        for (sid, c), (_, j, b), (_, m) in zip(self.per_shock, self.decomposition, self.max_bregman):
            rows.append({"shock_id": sid, "contribution": c, "jump_term": j,
                         "bregman_term": b, "max_endpoint_bregman": m})
        return json.dumps({"shocks": rows, "total": self.total}, indent=2)


def _checked_quad(f, lo, hi, points=None):
    pts = None
    if points:
        pts = sorted(p for p in points if lo < p < hi) or None
    val, err = quad(f, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-12, limit=400)
    if err > max(QUAD_ABS, QUAD_REL * abs(val)):
        raise QuadratureFail(f"quadrature error {err:.2e} on [{lo}, {hi}]")
    return val


def _label_breaks(sol: EntropySolution, pair: EntropyPair, lo, hi):
    u0 = sol.initial
    pts = [p for p in u0.kinks() if lo < p < hi]
    if u0.kind == "smooth_sampled":
        g = u0._grid
        pts.extend(g[(g > lo) & (g < hi)].tolist())
    # labels where u0 crosses a kink of psi
    if pair.kinks:
        probe = np.union1d(np.linspace(lo, hi, 513), pts)
        vals = u0.velocity(probe)
        for k in pair.kinks:
            d = vals - k
            for i in np.nonzero(d[:-1] * d[1:] < 0)[0]:
                pts.append(brentq(lambda q: float(u0.velocity(q)) - k, probe[i], probe[i + 1],
                                  xtol=1e-15))
    return sorted(set(pts))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def integral_psi_u0(sol: EntropySolution, pair: EntropyPair, lo: float, hi: float) -> float:
    """int_lo^hi psi(u0(a)) da.

    Sampled data is integrated piece by piece with 10-point Gauss-Legendre,
    which is exact for polynomial psi of degree <= 6 on cubic pieces.
    """
    if hi <= lo:
        return 0.0
    u0 = sol.initial
    edges = np.array([lo] + _label_breaks(sol, pair, lo, hi) + [hi])
    if u0.kind == "smooth_sampled":
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        vals = pair.psi(u0.velocity(nodes.ravel())).reshape(nodes.shape)
        return float(np.sum(half * (vals @ _GL_W)))
    return _checked_quad(lambda a: float(pair.psi(u0.velocity(a))), lo, hi, list(edges[1:-1]))


def lagrangian_anomaly(sol: EntropySolution, pair: EntropyPair, t: float) -> float:
    """I_psi(t) - I_psi(t0) summed over the shocks alive at ``t``."""
    if t <= sol.t0:
        return 0.0
    tau = t - sol.t0
    total = 0.0
    for s in sol.shocks_at(t):
        a, b = s.interval(t)
        um, up = s.u_minus(t), s.u_plus(t)
        total -= integral_psi_u0(sol, pair, a, b) - tau * pair.integral(up, um)
    return total


def _check_not_event(sol, t):
    if sol.event_near(t):
        raise ShockEventAtT(f"t={t} coincides with a formation or merger time")


def instantaneous_rate(sol: EntropySolution, pair: EntropyPair, t: float) -> AnomalyReport:
    """Per-shock rate from the uniformised label interval."""
    _check_not_event(sol, t)
    tau = t - sol.t0
    rep = AnomalyReport()
    for s in sol.shocks_at(t):
        a, b = s.interval(t)
        if b <= a:
            rep.per_shock.append((s.id, 0.0))
            rep.decomposition.append((s.id, 0.0, 0.0))
            rep.max_bregman.append((s.id, 0.0))
            continue
        xs, ust = s.position(t), s.u_star(t)
        psi_star = float(pair.psi(ust))

        def integrand(q):
            ua = (xs - q) / tau
            return np.array([psi_star - float(pair.psi(ua)), -float(bregman(pair, ust, ua))])

        # kinks of psi at u_a = k sit at labels x* - k tau
        pts = [xs - k * tau for k in pair.kinks if a < xs - k * tau < b]
        if pts:
            edges = [a] + sorted(pts) + [b]
            val = np.zeros(2)
            err = 0.0
            for lo, hi in zip(edges[:-1], edges[1:]):
                v, e = quad_vec(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, quadrature="gk15", norm="max")
                val += v
                err += e
        else:
            val, err = quad_vec(integrand, a, b, epsabs=1e-13, epsrel=1e-12, quadrature="gk15", norm="max")
        if err > max(QUAD_ABS, QUAD_REL * float(np.max(np.abs(val)))):
            raise QuadratureFail(f"rate quadrature error {err:.2e}")
        jump, breg = val[0] / tau, val[1] / tau
        rep.per_shock.append((s.id, jump + breg))
        rep.decomposition.append((s.id, jump, breg))
        um, up = s.u_minus(t), s.u_plus(t)
        rep.max_bregman.append((s.id, max(bregman(pair, ust, um), bregman(pair, ust, up))))
    rep.total = float(sum(c for _, c in rep.per_shock))
    return rep


def eulerian_rate(sol: EntropySolution, pair: EntropyPair, t: float) -> float:
    """Sum over shocks of u*(psi(u-) - psi(u+)) - (J(u-) - J(u+))."""
    total = 0.0
    for s in sol.shocks_at(t):
        um, up = s.u_minus(t), s.u_plus(t)
        us = 0.5 * (um + up)
        total += us * float(pair.psi(um) - pair.psi(up)) - float(pair.flux_J(um) - pair.flux_J(up))
    return total


def delta_psi_profile(sol: EntropySolution, pair: EntropyPair, shock_id: int, s_grid,
                      t: float | None = None) -> np.ndarray:
    """Partially uniformised entropy content of the final shock interval.

    At each ``s`` the labels already inside a shock (a descendant of
    ``shock_id`` alive at ``s``) carry the uniform velocity profile
    (x*(s) - a)/(s - t0); the rest carry u0.  The value at ``s = t`` is
    (t - t0) int_{u+}^{u-} psi, and before any formation it is the plain
    integral of psi(u0).
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if t is None:
        t = float(s_grid[-1])
    seg = sol.shock(shock_id)
    A, B = seg.interval(t)
    family = set(sol.tree.descendants(shock_id))
    out = np.empty(s_grid.size)
    for k, s in enumerate(s_grid):
        live = [r for r in sol.shocks_at(s) if r.id in family] if s > sol.t0 else []
        tau = s - sol.t0
        pieces, cursor, val = [], A, 0.0
        for r in sorted(live, key=lambda r: r.interval(s)[0]):
            a, b = r.interval(s)
            pieces.append((cursor, a))
            val += tau * pair.integral(r.u_plus(s), r.u_minus(s))
            cursor = b
        pieces.append((cursor, B))
        for lo, hi in pieces:
            val += integral_psi_u0(sol, pair, lo, hi)
        out[k] = val
    return out
