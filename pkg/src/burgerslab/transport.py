"""Passive densities and scalars carried by an inviscid entropy solution.

The density is the adhesion-model measure: the push-forward of rho0 by the
Lagrangian map on regular labels, plus one atom per live shock holding the
mass of its Lagrangian interval.  The scalar is the Lagrangian weak
solution: theta0 transported along characteristics, and the average of the
two endpoint values on each shock.

Notation used throughout: ``a-``/``a+`` are the endpoint labels of a shock
interval, ``du = u- - u+ > 0`` the velocity jump, ``tau = t - t0``.  On the
shock sides rho = rho0(a)/(1 + tau u0'(a)) and the Eulerian gradients are
u' = u0'/(1 + tau u0'), theta' = theta0'/(1 + tau u0').
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .dissipation import EntropyPair
from .entropy_core import EntropySolution, ShockRecord
from .errors import QuadratureFail

X_TOL = 1e-13
FD_STEP = 1e-3
_GX, _GW = np.polynomial.legendre.leggauss(16)
_TX, _TW = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# label profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Profile:
    """A function of the label on the window [lo, hi].

    Densities vanish outside the window.  ``breaks`` lists labels where the
    function or its derivative jumps.  Without ``deriv``, derivatives use
    4th-order one-sided stencils so that values across a break never enter.
    """

    fn: Callable
    lo: float
    hi: float
    breaks: tuple = ()
    deriv: Callable | None = None
    name: str = "profile"

    def __call__(self, a, side: int = 0):
        a = np.asarray(a, dtype=float)
        if side:
            a = np.nextafter(a, np.inf if side > 0 else -np.inf)
        inside = (a >= self.lo) & (a <= self.hi)
        return np.where(inside, self.fn(np.clip(a, self.lo, self.hi)), 0.0)

    def derivative(self, a, side: int = 0):
        a = np.asarray(a, dtype=float)
        if self.deriv is not None:
            if side:
                a = np.nextafter(a, np.inf if side > 0 else -np.inf)
            return np.asarray(self.deriv(a), dtype=float)
        h = FD_STEP * max(1.0, 0.1 * (self.hi - self.lo))
        if side == 0:
            f = [self.fn(a + k * h) for k in (-2, -1, 1, 2)]
            return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
        s = 1.0 if side > 0 else -1.0
        f = [self.fn(a + s * k * h) for k in range(5)]
        return s * (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)

    @classmethod
    def constant(cls, c: float, lo: float, hi: float) -> "Profile":
        return cls(lambda a: np.full(np.shape(a), float(c)), lo, hi,
                   deriv=lambda a: np.zeros(np.shape(a)), name=f"constant({c})")

    @classmethod
    def two_sided(cls, left: float, right: float, lo: float, hi: float, at: float = 0.0) -> "Profile":
        """``left`` for a < at and ``right`` for a > at."""
        return cls(lambda a: np.where(np.asarray(a) < at, float(left), float(right)), lo, hi,
                   breaks=(at,), deriv=lambda a: np.zeros(np.shape(a)),
                   name=f"two_sided({left},{right})")

    @classmethod
    def from_function(cls, fn, lo, hi, breaks=(), deriv=None, name="function") -> "Profile":
        return cls(fn, float(lo), float(hi), tuple(breaks), deriv, name)


# ---------------------------------------------------------------------------
# regular label segments and the inverse Lagrangian map
# ---------------------------------------------------------------------------

@dataclass
class _Segment:
    lo: float
    hi: float
    x_lo: float
    x_hi: float


def _segments(sol: EntropySolution, t: float, lo: float, hi: float, extra=()) -> list[_Segment]:
    """Maximal label intervals in [lo, hi] outside every shock interval.

    Segments are also cut at kinks of u0 and at ``extra`` breaks, so that
    the Lagrangian map is smooth and increasing inside each one.
    """
    tau = t - sol.t0
    holes = [s.interval(t) for s in sol.shocks_at(t)] if tau > 0 else []
    cuts = sorted({c for c in list(sol.initial.kinks()) + list(extra) if lo < c < hi})
    pieces = []
    edges = [lo] + cuts + [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        parts = [(a, b)]
        for h0, h1 in holes:
            nxt = []
            for p0, p1 in parts:
                if h1 <= p0 or h0 >= p1:
                    nxt.append((p0, p1))
                    continue
                if h0 > p0:
                    nxt.append((p0, h0))
                if h1 < p1:
                    nxt.append((h1, p1))
            parts = nxt
        pieces.extend(p for p in parts if p[1] > p[0])
    u0 = sol.initial
    out = []
    for a, b in pieces:
        xa = float(a + tau * u0.velocity(a, 1))
        xb = float(b + tau * u0.velocity(b, -1))
        out.append(_Segment(a, b, xa, xb))
    return out


def _invert(sol: EntropySolution, t: float, seg: _Segment, x) -> np.ndarray:
    """Labels in ``seg`` whose characteristics reach ``x`` at time t (bisection)."""
    tau = t - sol.t0
    x = np.asarray(x, dtype=float)
    lo = np.full(x.shape, seg.lo)
    hi = np.full(x.shape, seg.hi)
    u0 = sol.initial
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        right = mid + tau * u0.velocity(mid) > x
        hi = np.where(right, mid, hi)
        lo = np.where(right, lo, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def _gl_adaptive(f, edges, tol: float = 1e-14, max_panels: int = 1024) -> float:
    """Composite 16-point Gauss-Legendre over the pieces between ``edges``,
    every piece split into n panels, n doubling until converged."""
    edges = np.asarray(edges, dtype=float)
    edges = edges[np.concatenate([[True], np.diff(edges) > 0])]
    if edges.size < 2:
        return 0.0

    def rule(n):
        frac = np.linspace(0.0, 1.0, n + 1)
        e = (edges[:-1, None] + np.diff(edges)[:, None] * frac[None, :])
        e = np.append(e[:, :-1].ravel(), edges[-1])
        mid = 0.5 * (e[1:] + e[:-1])
        half = 0.5 * (e[1:] - e[:-1])
        nodes = (mid[:, None] + half[:, None] * _GX[None, :]).ravel()
        return float(np.sum((f(nodes).reshape(mid.size, -1) @ _GW) * half))

    n = 1
    prev = rule(n)
    while n < max_panels:
        n *= 2
        cur = rule(n)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureFail(f"composite quadrature on [{edges[0]}, {edges[-1]}] did not converge")


def _label_edges(sol: EntropySolution, seg: _Segment, extra=()) -> np.ndarray:
    """Segment ends plus interior labels where u0 or the profiles are not smooth."""
    u0 = sol.initial
    pts = list(u0.kinks()) + list(extra)
    if u0.kind == "smooth_sampled":
        pts.extend(u0._grid.tolist())
    inner = [p for p in pts if seg.lo < p < seg.hi]
    return np.array(sorted({seg.lo, seg.hi, *inner}))


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

@dataclass
class Atom:
    shock_id: int
    position: float
    mass: float
    theta: float | None = None


def _interval_mass(rho0: Profile, a: float, b: float) -> float:
    lo, hi = max(a, rho0.lo), min(b, rho0.hi)
    if hi <= lo:
        return 0.0
    pts = [p for p in rho0.breaks if lo < p < hi] or None
    val, err = quad(lambda q: float(rho0(q)), lo, hi, points=pts, epsabs=1e-14, epsrel=1e-13, limit=400)
    if err > 1e-11 * max(1.0, abs(val)):
        raise QuadratureFail(f"mass quadrature error {err:.2e}")
    return float(val)


class DensityMeasure:
    """rho(., t): a continuous part plus atoms at the live shocks."""

    def __init__(self, sol: EntropySolution, rho0: Profile, t: float):
        self.sol, self.rho0, self.t = sol, rho0, float(t)
        self.tau = self.t - sol.t0
        self.segments = _segments(sol, self.t, rho0.lo, rho0.hi, rho0.breaks)
        self.atoms: list[Atom] = []
        if self.tau > 0:
            for s in sol.shocks_at(self.t):
                a, b = s.interval(self.t)
                self.atoms.append(Atom(s.id, s.position(self.t), _interval_mass(rho0, a, b)))

    def labels(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Back-labels of ``x`` and a mask of points covered by a regular segment."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lab = np.full(x.shape, np.nan)
        for seg in self.segments:
            m = (x >= seg.x_lo) & (x <= seg.x_hi)
            if m.any():
                lab[m] = _invert(self.sol, self.t, seg, x[m])
        return lab, ~np.isnan(lab)

    def _rho_at_labels(self, a):
        u0 = self.sol.initial
        return self.rho0(a) / (1.0 + self.tau * u0.derivative(a))

    def continuous(self, x) -> np.ndarray:
        """Continuous density at x; zero in vacuum and outside the window."""
        lab, ok = self.labels(x)
        out = np.zeros(lab.shape)
        out[ok] = self._rho_at_labels(lab[ok])
        return out

    def side_densities(self, s: ShockRecord) -> tuple[float, float]:
        a, b = s.interval(self.t)
        u0 = self.sol.initial
        rm = float(self.rho0(a, -1)) / (1.0 + self.tau * float(u0.derivative(a, -1)))
        rp = float(self.rho0(b, 1)) / (1.0 + self.tau * float(u0.derivative(b, 1)))
        return rm, rp

    def integrate(self, g, space: str = "x", tol: float = 1e-13, extra_breaks=()) -> float:
        """int rho(x) g(x, label) dx over the continuous part.

        ``space="x"`` integrates in x through the inverse map; ``"label"``
        uses the push-forward int rho0(a) g(X(a), a) da.
        """
        total = 0.0
        tau = self.tau
        u0 = self.sol.initial
        extra = tuple(self.rho0.breaks) + tuple(extra_breaks)
        for seg in self.segments:
            le = _label_edges(self.sol, seg, extra)
            if space == "label":
                def f(a):
                    return self.rho0(a) * g(a + tau * u0.velocity(a), a)
                total += _gl_adaptive(f, le, tol)
            else:
                xe = le + tau * u0.velocity(le)
                xe[0], xe[-1] = seg.x_lo, seg.x_hi

                def f(x, seg=seg):
                    a = _invert(self.sol, self.t, seg, x)
                    return self._rho_at_labels(a) * g(x, a)
                total += _gl_adaptive(f, np.maximum.accumulate(xe), tol)
        return total

    def continuous_mass(self, space: str = "x") -> float:
        return self.integrate(lambda x, a: np.ones_like(x), space)

    def total_mass(self, space: str = "x") -> float:
        return self.continuous_mass(space) + sum(at.mass for at in self.atoms)

    def initial_mass(self) -> float:
        return _interval_mass(self.rho0, self.rho0.lo, self.rho0.hi)

    def mass_rate(self, shock_id: int) -> float:
        """dM/dt = du (rho- + rho+) / 2 for one shock."""
        s = self.sol.shock(shock_id)
        rm, rp = self.side_densities(s)
        return 0.5 * (s.u_minus(self.t) - s.u_plus(self.t)) * (rm + rp)

    def atoms_json(self) -> str:
        return json.dumps([asdict(a) for a in self.atoms], indent=2)


def evolve_density(rho0: Profile, sol: EntropySolution, t: float) -> DensityMeasure:
    """Adhesion-model density at time t from rho0 at sol.t0."""
    if t < sol.t0:
        raise ValueError("t must be >= t0")
    return DensityMeasure(sol, rho0, t)


def shock_mass(rho0: Profile, sol: EntropySolution, shock_id: int, t: float) -> float:
    a, b = sol.shock_interval(shock_id, t)
    return _interval_mass(rho0, a, b)


# ---------------------------------------------------------------------------
# momentum anomaly
# ---------------------------------------------------------------------------

@dataclass
class MomentumRow:
    shock_id: int
    anomaly: float
    flux_balance: float
    mass: float
    mass_rate: float


def _fd_derivative(f, t: float, h: float) -> float:
    return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)


def _fd_step(s: ShockRecord, t: float) -> float:
    room = min(t - s.t_star, s.t_end - t)
    return min(FD_STEP * max(1.0, abs(t)), 0.2 * room)


def momentum_anomaly(measure: DensityMeasure, sol: EntropySolution | None = None,
                     t: float | None = None) -> list[MomentumRow]:
    """Per-shock momentum source in both forms.

    ``anomaly``: -(1/4)[du^2 (rho- - rho+) + du (u-' - u+') M].
    ``flux_balance``: d(M x*')/dt minus the momentum flowing in from both
    sides, with the time derivative taken by 4th-order finite differences.
    """
    sol = sol or measure.sol
    t = measure.t if t is None else float(t)
    rho0 = measure.rho0
    rows = []
    for s in sol.shocks_at(t):
        um, up = s.u_minus(t), s.u_plus(t)
        du, us = um - up, 0.5 * (um + up)
        rm, rp = measure.side_densities(s)
        M = shock_mass(rho0, sol, s.id, t)
        second = -0.25 * (du * du * (rm - rp) + du * (s.grad_minus(t) - s.grad_plus(t)) * M)
        h = _fd_step(s, t)
        if h > 0:
            ddt = _fd_derivative(lambda q: shock_mass(rho0, sol, s.id, q) * s.u_star(q), t, h)
            first = ddt - (rm * um * (um - us) - rp * up * (up - us))
        else:
            first = math.nan
        rows.append(MomentumRow(s.id, second, first, M, 0.5 * du * (rm + rp)))
    return rows


# ---------------------------------------------------------------------------
# passive scalar
# ---------------------------------------------------------------------------

class ScalarField:
    """theta(., t) as a Lagrangian weak solution."""

    def __init__(self, sol: EntropySolution, theta0: Profile, t: float):
        self.sol, self.theta0, self.t = sol, theta0, float(t)
        self.tau = self.t - sol.t0
        self.segments = _segments(sol, self.t, theta0.lo, theta0.hi, theta0.breaks)
        self.shock_values: dict[int, float] = {}
        if self.tau > 0:
            for s in sol.shocks_at(self.t):
                self.shock_values[s.id] = self.shock_value(s)

    def shock_value(self, s: ShockRecord) -> float:
        a, b = s.interval(self.t)
        return 0.5 * (float(self.theta0(a, -1)) + float(self.theta0(b, 1)))

    def side_values(self, s: ShockRecord) -> tuple[float, float]:
        a, b = s.interval(self.t)
        return float(self.theta0(a, -1)), float(self.theta0(b, 1))

    def side_gradients(self, s: ShockRecord) -> tuple[float, float]:
        a, b = s.interval(self.t)
        u0 = self.sol.initial
        gm = float(self.theta0.derivative(a, -1)) / (1.0 + self.tau * float(u0.derivative(a, -1)))
        gp = float(self.theta0.derivative(b, 1)) / (1.0 + self.tau * float(u0.derivative(b, 1)))
        return gm, gp

    def __call__(self, x) -> np.ndarray:
        """theta at regular points (NaN in vacuum); shock points get theta*."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full(x.shape, np.nan)
        for seg in self.segments:
            m = (x >= seg.x_lo) & (x <= seg.x_hi)
            if m.any():
                out[m] = self.theta0(_invert(self.sol, self.t, seg, x[m]))
        if self.tau > 0:
            for s in self.sol.shocks_at(self.t):
                xs = s.position(self.t)
                out[np.abs(x - xs) <= X_TOL * max(1.0, abs(xs))] = self.shock_values[s.id]
        return out


def evolve_scalar(theta0: Profile, sol: EntropySolution, t: float) -> ScalarField:
    if t < sol.t0:
        raise ValueError("t must be >= t0")
    return ScalarField(sol, theta0, t)


def scalar_invariant(rho: DensityMeasure, theta: ScalarField, pair: EntropyPair,
                     space: str = "x") -> float:
    """J_psi = int rho psi(theta) dx, atoms included."""
    if abs(rho.t - theta.t) > 0:
        raise ValueError("density and scalar must be at the same time")
    th0 = theta.theta0
    cont = rho.integrate(lambda x, a: pair.psi(th0(a)), space, extra_breaks=th0.breaks)
    return cont + sum(at.mass * float(pair.psi(theta.shock_values[at.shock_id])) for at in rho.atoms)


def _lagrangian_term(rho0, theta0, pair, a, b, theta_star):
    psi_star = float(pair.psi(theta_star))
    lo, hi = max(a, rho0.lo), min(b, rho0.hi)
    if hi <= lo:
        return 0.0
    pts = sorted({p for p in tuple(rho0.breaks) + tuple(theta0.breaks) if lo < p < hi}) or None
    val, err = quad(lambda q: (psi_star - float(pair.psi(theta0(q)))) * float(rho0(q)), lo, hi,
                    points=pts, epsabs=1e-14, epsrel=1e-12, limit=400)
    if err > 1e-10 * max(1.0, abs(val)):
        raise QuadratureFail(f"scalar anomaly quadrature error {err:.2e}")
    return float(val)


def _shock_content(rho0, theta0, pair, sol, s, t):
    """M psi(theta*) and the Lagrangian loss term for one shock at t."""
    a, b = s.interval(t)
    ts = 0.5 * (float(theta0(a, -1)) + float(theta0(b, 1)))
    return _interval_mass(rho0, a, b) * float(pair.psi(ts)), _lagrangian_term(rho0, theta0, pair, a, b, ts)


def scalar_rate(rho0: Profile, theta0: Profile, sol: EntropySolution, pair: EntropyPair,
                s: ShockRecord, t: float) -> float:
    """Eulerian source of rho psi(theta) at one shock.

    du [ (rho+ (psi* - psi+) + rho- (psi* - psi-)) / 2 - psi'(theta*) (theta-' - theta+') M / 4 ]
    """
    rho = DensityMeasure.__new__(DensityMeasure)
    rho.sol, rho.rho0, rho.t, rho.tau = sol, rho0, float(t), float(t) - sol.t0
    th = ScalarField.__new__(ScalarField)
    th.sol, th.theta0, th.t, th.tau = sol, theta0, float(t), float(t) - sol.t0
    rm, rp = rho.side_densities(s)
    tm, tp = th.side_values(s)
    gm, gp = th.side_gradients(s)
    ts = 0.5 * (tm + tp)
    a, b = s.interval(t)
    M = _interval_mass(rho0, a, b)
    du = s.u_minus(t) - s.u_plus(t)
    ps = float(pair.psi(ts))
    jump = 0.5 * (rp * (ps - float(pair.psi(tp))) + rm * (ps - float(pair.psi(tm))))
    return du * (jump - 0.25 * float(pair.psi_prime(ts)) * (gm - gp) * M)


@dataclass
class ScalarAnomaly:
    lagrangian: float
    eulerian_rate: float
    integrated_rate: float
    event_jumps: float
    per_shock: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _graded_nodes(lo: float, hi: float, panels: int, graded: bool):
    # quadratic grading toward lo absorbs the sqrt(t - t_star) growth after formation
    j = np.linspace(0.0, 1.0, panels + 1)
    e = lo + (hi - lo) * (j * j if graded else j)
    mid = 0.5 * (e[1:] + e[:-1])
    half = 0.5 * (e[1:] - e[:-1])
    return (mid[:, None] + half[:, None] * _TX[None, :]).ravel(), (half[:, None] * _TW[None, :]).ravel()


def _integrated_rate(rho0, theta0, sol, pair, t_end, panels=32):
    """Time integral of the Eulerian rate up to t_end plus jumps at events."""
    integral, jumps = 0.0, 0.0
    tree = sol.tree
    for s in tree.segments:
        lo, hi = s.t_star, min(s.t_end, t_end)
        if hi <= lo or lo < sol.t0:
            continue
        if lo >= t_end:
            continue
        # content created at birth: the initial interval of a formation, or a merger
        born = s.interval(lo)
        if s.children:
            before = sum(_shock_content(rho0, theta0, pair, sol, tree.by_id(c), lo)[0]
                         for c in s.children)
            jumps += _shock_content(rho0, theta0, pair, sol, s, lo)[0] - before
        elif born[1] > born[0]:
            jumps += _shock_content(rho0, theta0, pair, sol, s, lo)[1]

        def total(n):
            tn, wn = _graded_nodes(lo, hi, n, True)
            return float(sum(w * scalar_rate(rho0, theta0, sol, pair, s, q) for q, w in zip(tn, wn)))

        prev = total(panels)
        cur = total(2 * panels)
        if abs(cur - prev) > 1e-7 * max(1.0, abs(cur)):
            prev, cur = cur, total(4 * panels)
            if abs(cur - prev) > 1e-6 * max(1.0, abs(cur)):
                raise QuadratureFail("time integral of the scalar rate did not converge")
        integral += cur
    return integral, jumps


def scalar_anomaly(rho0: Profile, theta0: Profile, sol: EntropySolution, pair: EntropyPair,
                   t: float, integrate: bool = True) -> ScalarAnomaly:
    """Lagrangian loss of int rho psi(theta) at t, and its Eulerian rate.

    ``integrated_rate`` is the Eulerian rate integrated from t0 plus the
    content jumps at merger and finite-width formation events; it should
    reproduce ``lagrangian``.
    """
    if t <= sol.t0:
        return ScalarAnomaly(0.0, 0.0, 0.0, 0.0, [])
    lag, rate, per = 0.0, 0.0, []
    for s in sol.shocks_at(t):
        _, term = _shock_content(rho0, theta0, pair, sol, s, t)
        r = scalar_rate(rho0, theta0, sol, pair, s, t) if not sol.event_near(t) else math.nan
        lag += term
        rate += r
        per.append({"shock_id": s.id, "lagrangian": term, "eulerian_rate": r})
    integ, jumps = _integrated_rate(rho0, theta0, sol, pair, t) if integrate else (math.nan, math.nan)
    return ScalarAnomaly(lag, rate, integ + jumps, jumps, per)


# ---------------------------------------------------------------------------
# weak residuals against space-time bumps
# ---------------------------------------------------------------------------

def _bump(z):
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) < 1.0
    zz = np.where(inside, z, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - zz * zz)), 0.0)


def _bump_prime(z):
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) < 1.0
    zz = np.where(inside, z, 0.0)
    return np.where(inside, _bump(zz) * (-2.0 * zz / (1.0 - zz * zz) ** 2), 0.0)


@dataclass(frozen=True)
class BumpTest:
    """phi(x, t) = b((x - xc)/rx) b((t - tc)/rt) with b(z) = exp(-1/(1 - z^2))."""

    xc: float
    tc: float
    rx: float
    rt: float

    def phi(self, x, t):
        return _bump((x - self.xc) / self.rx) * _bump((t - self.tc) / self.rt)

    def phi_t(self, x, t):
        return _bump((x - self.xc) / self.rx) * _bump_prime((t - self.tc) / self.rt) / self.rt

    def phi_x(self, x, t):
        return _bump_prime((x - self.xc) / self.rx) * _bump((t - self.tc) / self.rt) / self.rx


def bump_family(sol: EntropySolution, x_lo: float, x_hi: float, t_lo: float, t_hi: float,
                n: int = 20) -> list[BumpTest]:
    """``n`` bumps: half centred on shock paths (where any), the rest on a grid."""
    tests = []
    rt = 0.3 * (t_hi - t_lo)
    rx = 0.25 * (x_hi - x_lo)
    tcs = np.linspace(t_lo + rt, t_hi - rt, 5)
    on_shock = []
    for tc in tcs:
        for s in sol.shocks_at(float(tc)) if tc > sol.t0 else []:
            on_shock.append((s.position(float(tc)), float(tc)))
    k = 0
    while on_shock and len(tests) < n // 2:
        xc, tc = on_shock[k % len(on_shock)]
        shift = 0.15 * rx * ((k // len(on_shock)) % 3 - 1)
        tests.append(BumpTest(xc + shift, tc, rx * (0.6 + 0.1 * (k % 4)), rt))
        k += 1
    grid_x = np.linspace(x_lo + rx, x_hi - rx, 5)
    j = 0
    while len(tests) < n:
        tests.append(BumpTest(float(grid_x[j % 5]), float(tcs[(j // 5) % 5]), rx, rt))
        j += 1
    return tests


@dataclass
class WeakResidual:
    residual: np.ndarray
    predicted: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(np.abs(self.residual - self.predicted)))


def weak_residual(sol: EntropySolution, rho0: Profile, t_lo: float, t_hi: float,
                  tests: list[BumpTest], theta0: Profile | None = None,
                  panels: int = 24, label_panels: int = 48) -> WeakResidual:
    """Pairing of rho theta with (phi_t + u phi_x) over [t_lo, t_hi] x R.

    With ``theta0=None`` this is the density equation, whose residual should
    vanish.  Otherwise it is the residual of (rho theta)_t + (u rho theta)_x,
    and ``predicted`` holds minus the time integral of the per-shock source
    -(du/4)[(theta- - theta+)(rho- - rho+) + (theta-' - theta+') M]
    evaluated on each test function along the shock path.
    """
    if theta0 is None:
        theta0 = Profile.constant(1.0, rho0.lo, rho0.hi)
    ident = EntropyPair.builtin("momentum")
    events = sorted({sol.t0} | {e for e in sol.tree.event_times() if t_lo < e < t_hi})
    bounds = sorted({t_lo, t_hi} | {e for e in events if t_lo < e < t_hi})
    tn, wn = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        q, w = _graded_nodes(lo, hi, panels, any(abs(lo - e) < 1e-14 for e in events))
        tn.append(q)
        wn.append(w)
    tn, wn = np.concatenate(tn), np.concatenate(wn)
    m = len(tests)
    res = np.zeros(m)
    pred = np.zeros(m)
    lx, lw = np.polynomial.legendre.leggauss(8)
    u0 = sol.initial
    breaks = tuple(rho0.breaks) + tuple(theta0.breaks)
    for t, w in zip(tn, wn):
        tau = t - sol.t0
        inner = np.zeros(m)
        for seg in _segments(sol, t, rho0.lo, rho0.hi, breaks):
            e = np.linspace(seg.lo, seg.hi, label_panels + 1)
            mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
            a = (mid[:, None] + half[:, None] * lx[None, :]).ravel()
            wa = (half[:, None] * lw[None, :]).ravel()
            ua = u0.velocity(a)
            x = a + tau * ua
            weight = wa * rho0(a) * theta0(a)
            for k, b in enumerate(tests):
                inner[k] += np.sum(weight * (b.phi_t(x, t) + ua * b.phi_x(x, t)))
        if tau > 0:
            for s in sol.shocks_at(t):
                A, B = s.interval(t)
                M = _interval_mass(rho0, A, B)
                ts = 0.5 * (float(theta0(A, -1)) + float(theta0(B, 1)))
                xs, us = s.position(t), s.u_star(t)
                src = scalar_rate(rho0, theta0, sol, ident, s, t) if B > A else 0.0
                for k, b in enumerate(tests):
                    inner[k] += M * ts * (b.phi_t(xs, t) + us * b.phi_x(xs, t))
                    pred[k] -= w * src * b.phi(xs, t)
        res += w * inner
    return WeakResidual(res, pred)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def transport_table(rho: DensityMeasure, theta: ScalarField | None, xs) -> list[tuple]:
    """Rows (x, rho_continuous, theta, flag) with flag in {regular, shock, vacuum}."""
    xs = np.asarray(xs, dtype=float)
    dens = rho.continuous(xs)
    lab, ok = rho.labels(xs)
    th = theta(xs) if theta is not None else np.full(xs.shape, np.nan)
    shock_x = [a.position for a in rho.atoms]
    rows = []
    for x, d, v, good in zip(xs, dens, th, ok):
        if any(abs(x - p) <= X_TOL * max(1.0, abs(p)) for p in shock_x):
            flag = "shock"
        elif good:
            flag = "regular"
        else:
            flag = "vacuum"
        rows.append((float(x), float(d), float(v), flag))
    return rows


def transport_csv(rho: DensityMeasure, theta: ScalarField | None, xs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "rho_continuous", "theta", "flag"])
    for x, d, v, f in transport_table(rho, theta, xs):
        w.writerow([repr(x), repr(d), repr(v), f])
    return buf.getvalue()


def atom_table_json(rho: DensityMeasure, theta: ScalarField | None = None) -> str:
    rows = []
    for a in rho.atoms:
        th = theta.shock_values.get(a.shock_id) if theta is not None else None
        rows.append({"shock_id": a.shock_id, "x_star": a.position, "mass": a.mass, "theta_star": th})
    return json.dumps(rows, indent=2)
