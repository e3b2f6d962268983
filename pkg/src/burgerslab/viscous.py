"""Viscous Burgers solutions, backward transition densities and their ν → 0 limits.

The heat-kernel representation is used throughout.  The log-weight of label
``a`` at ``(x, t)`` is ``-(x-a)^2/(4 nu tau) - phi0(a)/(2 nu)``.  For small
``nu`` the weights span hundreds of orders of magnitude.  Every integral is
therefore formed in log space.  A uniform scan locates the region where the
log-weight is within ``CUTOFF`` of its maximum, and Gauss-Legendre panels
cover only that region.  Scan cells are a quarter of the narrowest possible
Laplace width, so no local peak can fall between samples.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .entropy_core import EntropySolution, lax_oleinik_minimizers
from .errors import AtomWindowOverlap, ConfigInvalid, IOFailure, QuadratureFail
from .initial import InitialVelocity, log_cosh

CUTOFF = 40.0          # neglected relative mass is below exp(-40) ~ 4e-18
QUAD_REL = 1e-10
WINDOW_WIDTHS = 8.0    # atom window half-width in Laplace widths

_GX, _GW = np.polynomial.legendre.leggauss(8)
_GX6, _GW6 = np.polynomial.legendre.leggauss(6)


# ---------------------------------------------------------------------------
# log-space quadrature
# ---------------------------------------------------------------------------

def _cells(logf, center, h, reach, kinks=()):
    """Cells (lo, hi) that hold all mass of exp(logf) above exp(-CUTOFF) of the peak."""
    R = max(float(reach), 16.0 * h)
    for _ in range(40):
        n = int(math.ceil(2.0 * R / h))
        if n > 4_000_000:
            raise QuadratureFail("log-weight scan grid too large")
        grid = center - R + h * np.arange(n + 1)
        lf = np.asarray(logf(grid), dtype=float)
        if not np.any(np.isfinite(lf)):
            raise QuadratureFail("no finite log-weight on the scan window")
        m = float(np.nanmax(lf))
        edge = m - CUTOFF - 10.0
        if lf[0] < edge and lf[-1] < edge:
            break
        R *= 2.0
    else:
        raise QuadratureFail("log-weight does not decay")
    live = lf > m - CUTOFF - 5.0
    cell = live[:-1] | live[1:]
    for _ in range(2):
        cell = cell | np.r_[cell[1:], False] | np.r_[False, cell[:-1]]
    lo, hi = grid[:-1][cell], grid[1:][cell]
    ks = [k for k in kinks if lo.size and lo[0] < k < hi[-1]]
    if ks:
        lo_l, hi_l = list(lo), list(hi)
        for k in ks:
            j = int(np.searchsorted(lo, k, side="right")) - 1
            if j >= 0 and lo[j] < k < hi[j]:
                lo_l.append(k)
                hi_l.append(hi[j])
                hi_l[j] = k
        order = np.argsort(lo_l)
        lo, hi = np.asarray(lo_l)[order], np.asarray(hi_l)[order]
    return lo, hi


def _nodes(lo, hi, gx=_GX, gw=_GW):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    lw = np.log((half[:, None] * gw[None, :]).ravel())
    return x, lw


@dataclass
class _LogQuad:
    """Gauss nodes with log-weights log(w_i) + logf(a_i)."""

    nodes: np.ndarray
    logw: np.ndarray
    log_total: float
    rel_err: float

    @classmethod
    def build(cls, logf, center, h, reach, kinks=(), check=True):
        lo, hi = _cells(logf, center, h, reach, kinks)
        x, lw = _nodes(lo, hi)
        logw = lw + logf(x)
        tot = float(logsumexp(logw))
        err = 0.0
        if check:
            x6, lw6 = _nodes(lo, hi, _GX6, _GW6)
            tot6 = float(logsumexp(lw6 + logf(x6)))
            err = abs(math.expm1(tot6 - tot))
            if err > QUAD_REL:
                raise QuadratureFail(f"log-space quadrature relative error {err:.2e}")
        return cls(x, logw, tot, err)

    def mean(self, values) -> float:
        p = np.exp(self.logw - self.log_total)
        return float(np.dot(p, values))


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def khokhlov_velocity(L, nu, x, t):
    """Viscous sawtooth (x - L tanh(L x / 2 nu t)) / t."""
    x = np.asarray(x, dtype=float)
    out = (x - L * np.tanh(L * x / (2.0 * nu * t))) / t
    return out if out.ndim else float(out)


def khokhlov_potential(L, nu, x, t):
    """x^2/(2t) - 2 nu log cosh(L x / 2 nu t); its x-derivative is the sawtooth velocity."""
    x = np.asarray(x, dtype=float)
    out = x * x / (2.0 * t) - 2.0 * nu * log_cosh(L * x / (2.0 * nu * t))
    return out if out.ndim else float(out)


def _khokhlov_drift(L, nu, t):
    # the closed-form potential solves phi_t + phi_x^2/2 = nu phi_xx only up to
    # a function of t; adding this one makes it an exact solution
    return nu * math.log(t) + L * L / (2.0 * t)


def stationary_shock_profile(u0, nu, x):
    """-u0 tanh(u0 x / 2 nu): the steady viscous shock between +u0 and -u0."""
    x = np.asarray(x, dtype=float)
    return -u0 * np.tanh(u0 * x / (2.0 * nu))


# ---------------------------------------------------------------------------
# viscous solution
# ---------------------------------------------------------------------------

class ViscousSolution:
    """Viscous Burgers solution from ``initial`` at ``t0`` with viscosity ``nu``.

    Sawtooth data whose ``nu_smoothing`` equals ``nu`` is the Khokhlov
    solution; ``velocity`` and ``potential`` then use the closed form, while
    ``hopf_cole_velocity`` always integrates.
    """

    def __init__(self, initial: InitialVelocity, nu: float, t0: float | None = None):
        if not (nu > 0 and math.isfinite(nu)):
            raise ConfigInvalid("nu must be a positive finite number")
        if t0 is None:
            t0 = float(initial.parameters["t_ref"]) if initial.kind == "sawtooth" else 0.0
        self.initial = initial
        self.nu = float(nu)
        self.t0 = float(t0)
        p = initial.parameters
        self.khokhlov = (initial.kind == "sawtooth"
                         and abs(float(p.get("nu_smoothing", 0.0)) - self.nu) <= 1e-14 * self.nu
                         and abs(self.t0 - float(p["t_ref"])) <= 1e-15 * self.t0)
        self._dplus = self._max_slope()

    def _max_slope(self) -> float:
        u0 = self.initial
        p = u0.parameters
        if u0.kind == "riemann":
            return 0.0
        if u0.kind == "linear_ramp":
            return max(0.0, float(p["slope"]))
        if u0.kind == "sawtooth":
            return 1.0 / float(p["t_ref"])
        g = u0._grid
        probe = np.linspace(g[0], g[-1], 16 * g.size)
        return max(0.0, float(np.max(u0.derivative(probe))))

    def laplace_width(self, tau: float, extra_curvature: float = 0.0) -> float:
        """Narrowest possible Gaussian width of the log-weights after time ``tau``."""
        curv = 1.0 / tau + self._dplus + extra_curvature
        return math.sqrt(2.0 * self.nu / curv)

    def _check_t(self, t):
        if not t > self.t0:
            raise ValueError(f"t={t} must exceed t0={self.t0}")

    def _heat_quad(self, x: float, t: float) -> _LogQuad:
        self._check_t(t)
        tau = t - self.t0
        u0, nu = self.initial, self.nu

        def logf(a):
            return -(x - a) ** 2 / (4.0 * nu * tau) - u0.potential(a) / (2.0 * nu)

        h = 0.25 * self.laplace_width(tau)
        reach = tau * u0.speed_bound(x - 1.0, x + 1.0) + 20.0 * math.sqrt(2.0 * nu * tau)
        return _LogQuad.build(logf, x, h, reach, u0.kinks())

    def log_heat(self, x, t):
        """log of the heat solution theta = exp(-phi / 2 nu) built from phi0."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        tau = t - self.t0
        out = np.array([self._heat_quad(float(xi), t).log_total for xi in xs])
        out -= 0.5 * math.log(4.0 * math.pi * self.nu * tau)
        return out if np.ndim(x) else float(out[0])

    def hopf_cole_velocity(self, x, t):
        """Weighted mean of u0 over labels by quadrature (vectorised over x)."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(xs.size)
        for i, xi in enumerate(xs):
            q = self._heat_quad(float(xi), t)
            out[i] = q.mean(self.initial.velocity(q.nodes))
        return out if np.ndim(x) else float(out[0])

    def hopf_cole_potential(self, x, t):
        out = -2.0 * self.nu * np.asarray(self.log_heat(x, t))
        return out if np.ndim(x) else float(out)

    def velocity(self, x, t):
        if self.khokhlov:
            self._check_t(t)
            return khokhlov_velocity(float(self.initial.parameters["L"]), self.nu, x, t)
        return self.hopf_cole_velocity(x, t)

    def potential(self, x, t):
        """phi(x, t), in the gauge fixed by phi0 at t0 (closed form for Khokhlov data)."""
        if t == self.t0:
            return self.initial.potential(x)
        if self.khokhlov:
            self._check_t(t)
            L = float(self.initial.parameters["L"])
            g = _khokhlov_drift(L, self.nu, t) - _khokhlov_drift(L, self.nu, self.t0)
            return khokhlov_potential(L, self.nu, x, t) + g + self.initial.potential_offset
        return self.hopf_cole_potential(x, t)

    def curvature_bound(self, s: float) -> float:
        """Upper bound of u_x(., s): the one-sided slope bound decays as 1/(1 + D+ (s - t0))."""
        d = self._dplus
        return d / (1.0 + d * (s - self.t0))


def hopf_cole_velocity(v: ViscousSolution, x, t):
    return v.hopf_cole_velocity(x, t)


def finite_difference_velocity(v: ViscousSolution, x_out, t: float, dx: float | None = None,
                               pad: float | None = None):
    """Direct method-of-lines integration, for cross-checking the quadrature.

    Fourth-order central differences in conservative form with classical RK4
    in time.  Ghost cells extrapolate linearly, which is exact in the far
    field of all built-in kinds.
    """
    x_out = np.asarray(x_out, dtype=float)
    nu, t0 = v.nu, v.t0
    tau = t - t0
    if dx is None:
        dx = min(0.05, 0.1 * math.sqrt(nu * tau), 0.2 * nu)
    if pad is None:
        pad = 2.0 + 2.0 * tau * v.initial.speed_bound(x_out.min() - 1, x_out.max() + 1)
    lo, hi = x_out.min() - pad, x_out.max() + pad
    n = int(math.ceil((hi - lo) / dx)) + 1
    x = np.linspace(lo, hi, n)
    h = x[1] - x[0]
    u = np.asarray(v.initial.velocity(x), dtype=float).copy()

    def ghost(w):
        g = np.empty(w.size + 4)
        g[2:-2] = w
        g[1] = 2 * w[0] - w[1]
        g[0] = 2 * w[0] - w[2]
        g[-2] = 2 * w[-1] - w[-2]
        g[-1] = 2 * w[-1] - w[-3]
        return g

    def rhs(w):
        g = ghost(w)
        f = 0.5 * g * g
        dfdx = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
        d2 = (-g[4:] + 16 * g[3:-1] - 30 * g[2:-2] + 16 * g[1:-3] - g[:-4]) / (12 * h * h)
        return -dfdx + nu * d2

    umax = float(np.max(np.abs(u))) + 1e-12
    dt = min(0.2 * h * h / nu, 0.4 * h / umax)
    steps = int(math.ceil(tau / dt))
    dt = tau / steps
    for _ in range(steps):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return np.interp(x_out, x, u)


# ---------------------------------------------------------------------------
# backward transition densities
# ---------------------------------------------------------------------------

class TransitionDensity:
    """Density of the backward label position at time ``s`` given arrival at (x, t).

    ``density(a)`` is proportional to
    ``exp(-[(x-a)^2/(2(t-s)) + phi(a,s) - phi(x,t)] / 2 nu)`` and normalised
    by quadrature.  ``gamma`` adds a time-only drift to phi for gauge tests.
    ``unnormalized_mass`` is the integral with the heat-kernel prefactor
    ``1/sqrt(4 pi nu (t-s))`` instead; it equals 1 when phi(., s) and phi(x, t)
    come from the same solution.
    """

    def __init__(self, base: ViscousSolution, x: float, t: float, s: float,
                 gamma: Callable[[float], float] | None = None):
        if not (base.t0 <= s < t):
            raise ValueError("need t0 <= s < t")
        self.base, self.x, self.t, self.s = base, float(x), float(t), float(s)
        self.gamma = gamma
        nu = base.nu
        dt = self.t - self.s
        g_s = gamma(self.s) if gamma else 0.0

        def logf(a):
            a = np.asarray(a, dtype=float)
            phi = np.asarray(base.potential(a, self.s), dtype=float) + g_s
            return -((self.x - a) ** 2 / (2.0 * dt) + phi) / (2.0 * nu)

        self._logf = logf
        h = 0.25 * math.sqrt(2.0 * nu / (1.0 / dt + base.curvature_bound(self.s)))
        u0 = base.initial
        reach = dt * u0.speed_bound(self.x - 1.0, self.x + 1.0) + 20.0 * math.sqrt(2.0 * nu * dt)
        kinks = u0.kinks() if self.s == base.t0 else ()
        self._h = h
        self._kinks = tuple(kinks)
        self._quad = _LogQuad.build(logf, self.x, h, reach, kinks)
        self.log_normalizer = self._quad.log_total
        phi_xt = float(base.potential(self.x, self.t)) + (gamma(self.t) if gamma else 0.0)
        self.log_unnormalized_mass = (self.log_normalizer + phi_xt / (2.0 * nu)
                                      - 0.5 * math.log(4.0 * math.pi * nu * dt))

    @property
    def unnormalized_mass(self) -> float:
        return math.exp(self.log_unnormalized_mass)

    def log_density(self, a):
        out = self._logf(a) - self.log_normalizer
        return out if np.ndim(out) else float(out)

    def density(self, a):
        out = np.exp(self.log_density(a))
        return out if np.ndim(out) else float(out)

    @property
    def support(self) -> tuple[float, float]:
        """Extent of the quadrature nodes (all mass above the cutoff)."""
        return float(self._quad.nodes.min()), float(self._quad.nodes.max())

    def expectation(self, g: Callable) -> float:
        """E[g(a)] under the density."""
        return self._quad.mean(np.asarray(g(self._quad.nodes), dtype=float))

    def mass(self, lo: float, hi: float) -> float:
        """Probability of [lo, hi]."""
        slo, shi = self.support
        lo, hi = max(lo, slo - self._h), min(hi, shi + self._h)
        if hi <= lo:
            return 0.0
        n = max(1, int(math.ceil((hi - lo) / self._h)))
        edges = np.linspace(lo, hi, n + 1)
        ks = [k for k in self._kinks if lo < k < hi]
        if ks:
            edges = np.unique(np.r_[edges, ks])
        x, lw = _nodes(edges[:-1], edges[1:])
        return float(np.exp(logsumexp(lw + self._logf(x)) - self.log_normalizer))

    def cdf(self, a):
        """Distribution function, from cumulative Gauss-Legendre cell masses and PCHIP."""
        if not hasattr(self, "_cdf"):
            from scipy.interpolate import PchipInterpolator

            slo, shi = self.support
            n = max(2, int(math.ceil((shi - slo) / self._h)))
            edges = np.linspace(slo, shi, n + 1)
            ks = [k for k in self._kinks if slo < k < shi]
            if ks:
                edges = np.unique(np.r_[edges, ks])
            x, lw = _nodes(edges[:-1], edges[1:])
            w = np.exp(lw + self._logf(x) - self.log_normalizer).reshape(-1, _GX.size).sum(axis=1)
            cum = np.r_[0.0, np.cumsum(w)]
            self._cdf = (slo, shi, PchipInterpolator(edges, cum / cum[-1]))
        slo, shi, f = self._cdf
        a = np.asarray(a, dtype=float)
        out = np.where(a <= slo, 0.0, np.where(a >= shi, 1.0, f(np.clip(a, slo, shi))))
        return out if out.ndim else float(out)

    def velocity_identity_residual(self) -> float:
        """E[u(a, s)] - u(x, t); zero when the backward representation holds."""
        b = self.base
        if self.s == b.t0:
            lhs = self.expectation(lambda a: b.initial.velocity(a))
        else:
            lhs = self.expectation(lambda a: b.velocity(a, self.s))
        return lhs - float(b.velocity(self.x, self.t))

    def to_csv(self, path, a_grid) -> None:
        a_grid = np.asarray(a_grid, dtype=float)
        ld = np.asarray(self.log_density(a_grid))
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["a", "density", "log_density"])
                for a, l in zip(a_grid, ld):
                    w.writerow([repr(float(a)), repr(float(np.exp(l))), repr(float(l))])
        except OSError as exc:
            raise IOFailure(str(exc)) from exc


def transition_density(v: ViscousSolution, s: float, x: float, t: float, **kw) -> TransitionDensity:
    return TransitionDensity(v, x, t, s, **kw)


# ---------------------------------------------------------------------------
# zero-viscosity limits
# ---------------------------------------------------------------------------

def limiting_atoms(inviscid: EntropySolution, x: float, s: float, t: float):
    """Positions at ``s`` of the minimising characteristics that reach (x, t).

    Returns ``(atoms, curvatures)``; curvature is the second derivative of the
    limiting action at the atom, 1/(t-s) + u_x(a, s).
    """
    u0, t0 = inviscid.initial, inviscid.t0
    labels, _ = lax_oleinik_minimizers(u0, x, t - t0)
    atoms, curv = [], []
    for lab in labels:
        v = (x - lab) / (t - t0)
        atoms.append(lab + (s - t0) * v)
        d = float(u0.derivative(lab))
        ux = d / (1.0 + (s - t0) * d) if s > t0 else d
        curv.append(1.0 / (t - s) + ux)
    return atoms, curv


@dataclass
class LimitRow:
    nu: float
    x_nu: float
    weights: list[float]
    windows: list[tuple[float, float]]
    residual: float


@dataclass
class LimitMeasure:
    atoms: list[tuple[float, float]]
    residual: float
    rows: list[LimitRow] = field(default_factory=list)
    extrapolated: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "atoms": [{"location": a, "weight": w} for a, w in self.atoms],
            "residual": self.residual,
            "extrapolated_weights": self.extrapolated,
            "flags": self.flags,
            "per_nu": [{"nu": r.nu, "x_nu": r.x_nu, "weights": r.weights,
                        "windows": [list(w) for w in r.windows], "residual": r.residual}
                       for r in self.rows],
        }, indent=2)


def _windows(atoms, curv, nu, delta_min):
    """Half-width 8 Laplace widths, cut back to half the gap between neighbours."""
    half = [WINDOW_WIDTHS * math.sqrt(2.0 * nu / c) for c in curv]
    shrunk = False
    for i in range(len(atoms) - 1):
        gap = atoms[i + 1] - atoms[i]
        if half[i] + half[i + 1] > gap:
            half[i] = min(half[i], 0.5 * gap)
            half[i + 1] = min(half[i + 1], 0.5 * gap)
            shrunk = True
    if min(half) < delta_min:
        raise AtomWindowOverlap(f"atom windows overlap at nu={nu}: half-width {min(half):.3g}")
    return [(a - hw, a + hw) for a, hw in zip(atoms, half)], shrunk


def limit_measure(family: Callable[[float], TransitionDensity], inviscid: EntropySolution,
                  x: float, s: float, t: float, nu_sequence) -> LimitMeasure:
    """Mass of the transition densities near each limiting atom, per viscosity.

    ``family(nu)`` returns the density at the endpoint x_nu = x + O(nu).
    Atom weights at the smallest nu are reported, together with a linear
    extrapolation in nu from the last two.
    """
    nus = [float(n) for n in nu_sequence]
    if any(b >= a for a, b in zip(nus, nus[1:])):
        raise ValueError("nu_sequence must be strictly decreasing")
    atoms, curv = limiting_atoms(inviscid, x, s, t)
    jump = (atoms[-1] - atoms[0]) / (t - s)
    rows = []
    flags = []
    if inviscid.event_near(t, 1e-6):
        flags.append("EVENT_INSTANT")
    for nu in nus:
        try:
            dens = family(nu)
        except ValueError:
            flags.append(f"NO_FRAME_POINT nu={nu:g}")
            continue
        delta_min = max(nu / jump, 1e-3 * inviscid.initial.length_scale) if jump > 0 else 0.0
        win, shrunk = _windows(atoms, curv, nu, delta_min)
        if shrunk and "WINDOW_SHRUNK" not in flags:
            flags.append("WINDOW_SHRUNK")
        w = [dens.mass(lo, hi) for lo, hi in win]
        rows.append(LimitRow(nu, dens.x, w, win, 1.0 - sum(w)))
    if not rows:
        raise ValueError("no admissible viscosity in the sequence")
    last = rows[-1]
    extra = list(last.weights)
    if len(rows) >= 2:
        r1, r2 = rows[-2], rows[-1]
        extra = [w2 + (w2 - w1) * r2.nu / (r1.nu - r2.nu) for w1, w2 in zip(r1.weights, r2.weights)]
    return LimitMeasure(list(zip(atoms, last.weights)), last.residual, rows, extra, flags)


def retention_decay(family: Callable[[float], TransitionDensity], a0: float, nu_sequence):
    """Fit log(p_nu(a0) sqrt(nu)) = c0 + slope/nu; returns (slope, intercept)."""
    nus = np.asarray(nu_sequence, dtype=float)
    y = np.array([family(n).log_density(a0) + 0.5 * math.log(n) for n in nus])
    slope, icpt = np.polyfit(1.0 / nus, y, 1)
    return float(slope), float(icpt)


# ---------------------------------------------------------------------------
# Khokhlov helpers
# ---------------------------------------------------------------------------

def khokhlov_solution(L: float, nu: float, t_ref: float, potential_offset: float = 0.0) -> ViscousSolution:
    init = InitialVelocity("sawtooth", {"L": L, "t_ref": t_ref, "nu_smoothing": nu},
                           potential_offset=potential_offset)
    return ViscousSolution(init, nu, t_ref)


def khokhlov_frame_point(L: float, nu: float, t: float, target: float) -> float:
    """The point inside the viscous layer where the sawtooth velocity equals ``target``.

    The root is sought on the branch where the velocity falls through the
    layer.  Raises ValueError when ``target`` is not attained there, which
    happens once the layer is too wide relative to the jump.
    """
    r = L * L / (2.0 * nu * t)
    if r <= 1.0:
        raise ValueError("no viscous layer: velocity is monotone increasing")
    xc = 2.0 * nu * t / L * math.acosh(math.sqrt(r))
    f = lambda z: float(khokhlov_velocity(L, nu, z, t)) - target
    if not f(-xc) > 0 > f(xc):
        raise ValueError(f"velocity {target} is not attained inside the layer at nu={nu}")
    return brentq(f, -xc, xc, xtol=1e-16, rtol=1e-15)


def khokhlov_family(L: float, s: float, t: float, p: float = 0.5, t_ref: float | None = None):
    """nu -> transition density at the point whose velocity is p u- + (1-p) u+."""
    if t_ref is None:
        t_ref = min(s, 0.5 * t) if s > 0 else 0.5 * t
    target = (2.0 * p - 1.0) * L / t

    def make(nu):
        xn = khokhlov_frame_point(L, nu, t, target)
        return TransitionDensity(khokhlov_solution(L, nu, t_ref), xn, t, s)

    return make


def khokhlov_inviscid(L: float, t_ref: float) -> EntropySolution:
    return EntropySolution(InitialVelocity("sawtooth", {"L": L, "t_ref": t_ref}), t_ref)
