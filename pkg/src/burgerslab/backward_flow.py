"""Geometric backward Lagrangian flow ending at a shock point.

A backward path that ends on a shock at ``tf`` follows the shock back in time
until a random branch time ``tau`` and then leaves along the straight
characteristic on the left (side -1) or right (side +1).  The law of
``(tau, side)`` is fixed by requiring the labels at a reference time ``t0``
(before any shock of the tree forms) to be uniformly distributed over the
shock's final label interval.  With labels ``b = a + (t0 - T0) u0(a)``:

    p_pm(tau) = |d b_pm / d tau| / (b_+^f - b_-^f)
              = (u- - u+) (1 - u'_pm (tau - t0)) / (2 (u-^f - u+^f)(tf - t0)).

Sampling draws the label uniformly and reads ``(tau, side)`` off tabulated
label intervals, which is inverse-CDF sampling of the law above.  For shock
trees the same label decides which segment (and which child at every merger)
absorbs the path.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .entropy_core import EntropySolution, ShockRecord
from .errors import OutOfSupport, QuadratureFail, T0TooLate
from .rng import path_keys, uniforms

TABLE_SIZE = 4096


@dataclass
class _SegmentTable:
    sid: int
    start: float
    end: float
    tau: np.ndarray
    a_minus: np.ndarray
    a_plus: np.ndarray
    b_minus: np.ndarray
    b_plus: np.ndarray
    leaf: bool

    def _inverse(self, b, side):
        if side > 0:
            bb, aa = self.b_plus, self.a_plus
        else:
            bb, aa = self.b_minus[::-1], self.a_minus[::-1]
        tt = self.tau if side > 0 else self.tau[::-1]
        keep = np.concatenate([[True], np.diff(bb) > 0])
        bb, aa, tt = bb[keep], aa[keep], tt[keep]
        if bb.size < 2:
            return np.full_like(b, self.start), np.full_like(b, aa[0])
        bq = np.clip(b, bb[0], bb[-1])
        return PchipInterpolator(bb, tt)(bq), PchipInterpolator(bb, aa)(bq)


class BranchLaw:
    """Law of the branch time and side for paths ending on ``shock_id`` at ``tf``."""

    def __init__(self, sol: EntropySolution, shock_id: int, t0: float, tf: float,
                 table_size: int = TABLE_SIZE):
        self.sol = sol
        self.shock_id = int(shock_id)
        self.t0 = float(t0)
        self.tf = float(tf)
        tree = sol.tree
        root = tree.by_id(self.shock_id)
        if not (root.t_star <= self.tf <= root.t_end + 1e-14):
            raise OutOfSupport(f"shock {shock_id} is not alive at tf={tf}")
        if self.t0 < sol.t0 - 1e-14:
            raise ValueError("reference time precedes the initial time")
        self.members = tree.descendants(self.shock_id)
        leaves = [k for k in self.members if not tree.by_id(k).children]
        first = min(tree.by_id(k).t_star for k in leaves)
        if self.t0 > first + 1e-12 * max(1.0, abs(first)):
            raise T0TooLate(f"t0={t0} is after the first formation time {first:.6g} of the tree")
        self.support = (min(tree.by_id(k).t_star for k in self.members), self.tf)
        a_m, a_p = root.interval(self.tf)
        self.a_f = (a_m, a_p)
        self.b_f = (self.label_at_t0(a_m, -1), self.label_at_t0(a_p, 1))
        self.delta_b_f = self.b_f[1] - self.b_f[0]
        self.tables = {k: self._table(tree.by_id(k), table_size) for k in self.members}
        self.atoms = []
        for k in leaves:
            t = self.tables[k]
            w = t.b_plus[0] - t.b_minus[0]
            if w > 1e-12 * self.delta_b_f:
                self.atoms.append((t.start, w / self.delta_b_f))
        self.segment_probs = {}
        self.merger_probs = {}
        for k in self.members:
            t = self.tables[k]
            width_end = t.b_plus[-1] - t.b_minus[-1]
            kids = tree.by_id(k).children
            kid_w = {c: self.tables[c].b_plus[-1] - self.tables[c].b_minus[-1] for c in kids}
            self.segment_probs[k] = (width_end - sum(kid_w.values())) / self.delta_b_f
            if kids:
                tot = sum(kid_w.values())
                self.merger_probs[k] = {c: w / tot for c, w in kid_w.items()}

    # -- construction ---------------------------------------------------------
    def label_at_t0(self, a, side=0):
        u0 = self.sol.initial
        return a + (self.t0 - self.sol.t0) * u0.velocity(a, side)

    def _seg_end(self, seg: ShockRecord) -> float:
        return self.tf if seg.id == self.shock_id else seg.t_end

    def _table(self, seg: ShockRecord, n: int) -> _SegmentTable:
        s0, s1 = seg.t_star, self._seg_end(seg)
        q = np.linspace(0.0, 1.0, n)
        tau = s0 + (s1 - s0) * q * q
        am, ap = seg.intervals(tau)
        u0 = self.sol.initial
        c = self.t0 - self.sol.t0
        bm = am + c * u0.velocity(am, -1)
        bp = ap + c * u0.velocity(ap, 1)
        return _SegmentTable(seg.id, s0, s1, tau, am, ap, bm, bp, not seg.children)

    # -- densities --------------------------------------------------------------
    def _segment_density(self, seg: ShockRecord, tau, side: int, since_start=None):
        tau = np.asarray(tau, dtype=float)
        am, ap = seg.intervals(tau.ravel())
        u0 = self.sol.initial
        um, up = u0.velocity(am, -1), u0.velocity(ap, 1)
        a = ap if side > 0 else am
        d = u0.derivative(a, side)
        # Eulerian one-sided gradient at the shock
        g = d / (1.0 + (tau.ravel() - self.sol.t0) * d)
        p = (um - up) * (1.0 - g * (tau.ravel() - self.t0)) / (2.0 * self.delta_b_f)
        local = getattr(seg.endpoints, "in_piece_half_width", None)
        if local is not None:
            # on the formation cubic: u- - u+ = 2h/tau and 1 + tau u0' = 2 tau c3 h^2,
            # so the ratio is evaluated without cancellation
            h = local(tau.ravel(), None if since_start is None else np.ravel(since_start))
            m = np.isfinite(h) & (h > 0)
            if m.any():
                c3 = seg.endpoints._local[2]
                tl = tau.ravel()[m] - self.sol.t0
                p[m] = (1.0 + (self.t0 - self.sol.t0) * d[m]) / (2.0 * tl * tl * c3 * h[m] * self.delta_b_f)
        return p.reshape(tau.shape)

    def _density(self, tau, side):
        tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.zeros(tau_arr.shape)
        tree = self.sol.tree
        for k in self.members:
            seg = tree.by_id(k)
            end = self._seg_end(seg)
            m = (tau_arr > seg.t_star) & ((tau_arr < end) | ((tau_arr == end) & (k == self.shock_id)))
            if m.any():
                out[m] += self._segment_density(seg, tau_arr[m], side)
        return out if np.ndim(tau) else float(out[0])

    def p_plus(self, tau):
        """Density per unit time of branching to the right at ``tau``."""
        return self._density(tau, 1)

    def p_minus(self, tau):
        return self._density(tau, -1)

    def _sigma_breaks(self, k: int) -> np.ndarray:
        """Break points in sigma where an endpoint label crosses a data knot."""
        t = self.tables[k]
        sig = np.sqrt(t.tau - t.start)
        knots = self.sol.initial.kinks()
        if self.sol.initial.kind == "smooth_sampled":
            knots = self.sol.initial._grid
        out = [np.linspace(sig[0], sig[-1], 65)]
        if self.sol.tree.by_id(k).children == [] and sig[-1] > 0:
            # the density varies on the scale sigma itself near a formation point
            out.append(sig[-1] * 0.8 ** np.arange(1, 42))
        ep = self.sol.tree.by_id(k).endpoints
        if getattr(ep, "fresh", False) and t.start < ep.ts[0] < t.end:
            # tracked endpoints switch from the local square-root law to Newton here
            out.append([np.sqrt(ep.ts[0] - t.start)])
        for arr in (t.a_minus, t.a_plus):
            lo, hi = min(arr[0], arr[-1]), max(arr[0], arr[-1])
            inside = np.asarray([q for q in knots if lo < q < hi])
            if inside.size:
                order = np.argsort(arr)
                out.append(self._refine_crossings(k, arr is t.a_plus, inside,
                                                  np.interp(inside, arr[order], sig[order])))
        return np.unique(np.concatenate(out))

    def _refine_crossings(self, k, right, knots, sig):
        """Secant steps on the exact endpoint for the sigma where it meets each knot."""
        seg = self.sol.tree.by_id(k)
        t = self.tables[k]
        top = np.sqrt(t.end - t.start)

        def g(s):
            a = seg.intervals(np.minimum(t.start + s * s, t.end))[1 if right else 0]
            return a - knots

        s0 = np.clip(sig * (1 - 1e-6), 0.0, top)
        s1 = np.clip(sig, 0.0, top)
        g0, g1 = g(s0), g(s1)
        for _ in range(6):
            den = g1 - g0
            ok = den != 0
            s2 = np.where(ok, s1 - g1 * (s1 - s0) / np.where(ok, den, 1.0), s1)
            s2 = np.clip(s2, 0.0, top)
            s0, g0, s1 = s1, g1, s2
            g1 = g(s1)
        return s1

    def normalization(self, tol: float = 2e-10) -> float:
        """Integral of p_+ + p_- by quadrature plus any atom at formation.

        Each segment is integrated in sigma = sqrt(tau - start), which removes
        the inverse square-root growth of the density at a formation point.
        Gauss-Legendre panels end wherever an endpoint crosses a data knot and
        are bisected until 8- and 12-point rules agree.
        """
        tree = self.sol.tree
        total = sum(m for _, m in self.atoms)
        x8, w8 = np.polynomial.legendre.leggauss(8)
        x12, w12 = np.polynomial.legendre.leggauss(12)
        for k in self.members:
            seg = tree.by_id(k)
            t = self.tables[k]

            def f(sig):
                tau = np.minimum(t.start + sig * sig, t.end)
                out = np.zeros(sig.shape)
                m = sig > 0
                tm, dt = tau[m], sig[m] ** 2
                out[m] = 2.0 * sig[m] * (self._segment_density(seg, tm, 1, dt)
                                         + self._segment_density(seg, tm, -1, dt))
                return out

            edges = self._sigma_breaks(k)
            lo, hi = edges[:-1], edges[1:]
            acc = err = 0.0
            for depth in range(13):
                if lo.size == 0:
                    break
                mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
                q8 = half * (f((mid[:, None] + half[:, None] * x8).ravel()).reshape(-1, 8) @ w8)
                q12 = half * (f((mid[:, None] + half[:, None] * x12).ravel()).reshape(-1, 12) @ w12)
                diff = np.abs(q12 - q8)
                ok = diff <= np.maximum(tol * half / max(edges[-1], 1e-300), 4e-16)
                if depth == 12:
                    # panels this deep sit where the endpoint solve itself is noisy
                    ok[:] = True
                    err += float(np.sum(diff))
                acc += float(np.sum(q12[ok]))
                lo, hi = lo[~ok], hi[~ok]
                m = 0.5 * (lo + hi)
                lo, hi = np.concatenate([lo, m]), np.concatenate([m, hi])
            if err > tol:
                raise QuadratureFail(f"normalisation error estimate {err:.2e} on segment {k}")
            total += acc
        return total

    # -- distribution functions ---------------------------------------------------
    def absorbed_fraction(self, t):
        """Fraction of final labels already inside the shock tree at time ``t``."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t_arr.shape)
        tree = self.sol.tree
        for k in self.members:
            seg = tree.by_id(k)
            end = self._seg_end(seg)
            m = (t_arr >= seg.t_star) & ((t_arr < end) | (k == self.shock_id) & (t_arr <= end))
            if m.any():
                a, b = seg.intervals(t_arr[m])
                out[m] += self.label_at_t0(b, 1) - self.label_at_t0(a, -1)
        out /= self.delta_b_f
        out[t_arr >= self.tf] = 1.0
        return out if np.ndim(t) else float(out[0])

    def cdf(self, tau):
        """P(branch time <= tau), from exact label intervals."""
        return self.absorbed_fraction(tau)

    def merger_consistency(self) -> dict[int, float]:
        """|sum_c B_c u*_c - u*_parent| at each merger of the tree."""
        tree = self.sol.tree
        out = {}
        for k, probs in self.merger_probs.items():
            tm = tree.by_id(k).t_star
            lhs = sum(B * tree.by_id(c).u_star(tm) for c, B in probs.items())
            out[k] = abs(lhs - tree.by_id(k).u_star(tm))
        return out


def branch_densities(sol: EntropySolution, shock_id: int, t0: float, tf: float) -> BranchLaw:
    return BranchLaw(sol, shock_id, t0, tf)


def jump_rates(law: BranchLaw, tau: float) -> tuple[float, float]:
    """Rates of leaving the shock to the right and left at ``tau`` (backward in time)."""
    if not (law.support[0] < tau <= law.tf):
        raise OutOfSupport(f"tau={tau} outside ({law.support[0]}, {law.tf}]")
    P = law.absorbed_fraction(tau) if tau < law.tf else 1.0
    return law.p_plus(tau) / P, law.p_minus(tau) / P


def atom_mass(law: BranchLaw, t: float) -> float:
    """Probability that a path is on the shock at time ``t``."""
    return law.absorbed_fraction(t)


# ---------------------------------------------------------------------------
# path ensembles
# ---------------------------------------------------------------------------

LEFT, ON_SHOCK, RIGHT = -1, 0, 1


@dataclass
class BackwardPath:
    branch_time: float
    side: int
    segment: int
    label: float
    ensemble: "PathEnsemble" = field(repr=False)
    index: int = 0

    def trajectory(self, t):
        return float(self.ensemble.position(t)[self.index])

    def label_history(self):
        """Pieces (t_from, t_to, state) in increasing time."""
        sol = self.ensemble.sol
        out = [(sol.t0, self.branch_time, self.side)]
        seg = sol.tree.by_id(self.segment)
        t = self.branch_time
        while True:
            end = min(seg.t_end, self.ensemble.tf)
            out.append((t, end, ON_SHOCK))
            if seg.parent is None or end >= self.ensemble.tf:
                break
            t, seg = end, sol.tree.by_id(seg.parent)
        return out


class PathEnsemble:
    """Sampled backward paths, stored as (tau, side, absorbing segment, label a).

    Before ``tau`` a path is the characteristic ``a + (t - T0) u0(a)``; from
    ``tau`` on it is the position of whichever ancestor segment is alive.
    """

    def __init__(self, sol: EntropySolution, root: int, tf: float, tau, side, seg, a):
        self.sol = sol
        self.root = int(root)
        self.tf = float(tf)
        self.tau = np.asarray(tau, dtype=float)
        self.side = np.asarray(side, dtype=np.int64)
        self.seg = np.asarray(seg, dtype=np.int64)
        self.a = np.asarray(a, dtype=float)
        u0 = sol.initial
        self.v0 = np.where(self.side > 0, u0.velocity(self.a, 1), u0.velocity(self.a, -1))
        rs = sol.tree.by_id(self.root)
        self.x_f = rs.position(self.tf)
        self.u_star_f = rs.u_star(self.tf)

    def __len__(self):
        return self.tau.size

    def path(self, i: int) -> BackwardPath:
        return BackwardPath(float(self.tau[i]), int(self.side[i]), int(self.seg[i]),
                            float(self.a[i]), self, i)

    def _ancestor(self, k: int, t: float) -> ShockRecord:
        tree = self.sol.tree
        seg = tree.by_id(k)
        while t >= seg.t_end and seg.parent is not None and seg.id != self.root:
            seg = tree.by_id(seg.parent)
        return seg

    def _state(self, t):
        on = self.tau <= t
        x = self.a + (t - self.sol.t0) * self.v0
        v = self.v0.copy()
        owner = np.full(self.tau.size, -1, dtype=np.int64)
        for k in np.unique(self.seg[on]):
            anc = self._ancestor(int(k), t)
            m = on & (self.seg == k)
            x[m] = anc.position(t)
            v[m] = anc.u_star(t)
            owner[m] = anc.id
        return x, v, on, owner

    def position(self, t):
        return self._state(t)[0]

    def velocity(self, t):
        """Right-continuous velocity: u0(a) before branching, u* on the shock."""
        return self._state(t)[1]

    def labels(self, t):
        on = self.tau <= t
        return np.where(on, ON_SHOCK, self.side)

    def on_shock_fraction(self, t) -> float:
        return float(np.mean(self.tau <= t))

    def merger_frequencies(self) -> dict[int, dict[int, float]]:
        """Empirical child frequencies at each merger among paths reaching it."""
        tree = self.sol.tree
        members = tree.descendants(self.root)
        out = {}
        for k in members:
            kids = tree.by_id(k).children
            if not kids:
                continue
            counts = {c: int(np.isin(self.seg, tree.descendants(c)).sum()) for c in kids}
            tot = sum(counts.values())
            out[k] = {c: (n / tot if tot else float("nan")) for c, n in counts.items()}
        return out

    def to_csv(self, path, times, max_paths: int | None = None):
        times = np.asarray(times, dtype=float)
        n = len(self) if max_paths is None else min(max_paths, len(self))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "tau", "side", "t", "x", "label"])
            for t in times:
                x = self.position(t)
                lab = self.labels(t)
                for i in range(n):
                    w.writerow([i, repr(float(self.tau[i])), int(self.side[i]), repr(float(t)),
                                repr(float(x[i])), int(lab[i])])


def sample_paths(law: BranchLaw, n: int, seed: int, start: int = 0) -> PathEnsemble:
    """Draw ``n`` paths; path ``i`` uses the stream ``hash(seed, start + i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    keys = path_keys(seed, np.arange(start, start + n))
    b = law.b_f[0] + uniforms(keys, 0) * law.delta_b_f
    tree = law.sol.tree
    seg = np.full(n, law.shock_id, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    # descend through mergers: a label inside a child's final interval belongs to it
    while not done.all():
        progressed = False
        for k in np.unique(seg[~done]):
            kids = tree.by_id(int(k)).children
            m = (seg == k) & ~done
            if not kids:
                done[m] = True
                continue
            hit = np.zeros(n, dtype=bool)
            for c in kids:
                t = law.tables[c]
                inside = m & (b >= t.b_minus[-1]) & (b <= t.b_plus[-1]) & ~hit
                seg[inside] = c
                hit |= inside
            done[m & ~hit] = True
            progressed = True
        if not progressed:
            break
    tau = np.empty(n)
    side = np.empty(n, dtype=np.int64)
    a = np.empty(n)
    for k in np.unique(seg):
        t = law.tables[int(k)]
        m = seg == k
        right = m & (b > t.b_plus[0])
        left = m & (b < t.b_minus[0])
        inner = m & ~right & ~left
        if right.any():
            tau[right], a[right] = t._inverse(b[right], 1)
            side[right] = RIGHT
        if left.any():
            tau[left], a[left] = t._inverse(b[left], -1)
            side[left] = LEFT
        if inner.any():
            # a whole label interval collapsing at once (piecewise-linear data)
            tau[inner] = t.start
            mid = 0.5 * (t.b_minus[0] + t.b_plus[0])
            side[inner] = np.where(b[inner] >= mid, RIGHT, LEFT)
            ag = np.linspace(t.a_minus[0], t.a_plus[0], 2049)
            a[inner] = np.interp(b[inner], law.label_at_t0(ag), ag)
    return PathEnsemble(law.sol, law.shock_id, law.tf, tau, side, seg, a)


def limiting_two_state(sol: EntropySolution, shock_id: int, tf: float, n: int, seed: int) -> PathEnsemble:
    """Paths that leave the shock immediately at ``tf``, left or right with probability 1/2."""
    seg = sol.tree.by_id(shock_id)
    am, ap = seg.interval(tf)
    u = uniforms(path_keys(seed, np.arange(n)), 0)
    side = np.where(u < 0.5, LEFT, RIGHT)
    a = np.where(side > 0, ap, am)
    return PathEnsemble(sol, shock_id, tf, np.full(n, float(tf)), side, np.full(n, shock_id), a)


def shock_velocity_representation(sol: EntropySolution, shock_id: int, t: float) -> dict[str, float]:
    """Three expressions of the shock velocity that must coincide.

    ``mean_sides`` is (u_+ + u_-)/2, ``endpoint_form`` rewrites each side as
    (x* - a_pm)/tau and ``label_average`` averages (x* - a)/tau over the
    label interval.
    """
    seg = sol.tree.by_id(shock_id)
    am, ap = seg.interval(t)
    tau = t - sol.t0
    xs = seg.position(t)
    label_avg = quad(lambda a: (xs - a) / tau, am, ap, epsabs=1e-14, epsrel=1e-13)[0] / (ap - am)
    return {"mean_sides": 0.5 * (seg.u_minus(t) + seg.u_plus(t)),
            "endpoint_form": 0.5 * ((xs - ap) / tau + (xs - am) / tau),
            "label_average": label_avg,
            "shock_velocity": seg.u_star(t)}


# ---------------------------------------------------------------------------
# martingale checks
# ---------------------------------------------------------------------------

@dataclass
class MartingaleReport:
    rows: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    z_threshold: float = 3.0

    @property
    def max_abs_z(self) -> float:
        return max((abs(r["z"]) for r in self.rows), default=0.0)

    @property
    def max_abs_dev(self) -> float:
        return max((abs(r["mean"] - r["target"]) for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return bool(self.rows) and self.max_abs_z <= self.z_threshold

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "flags": self.flags, "max_abs_z": self.max_abs_z,
                           "max_abs_dev": self.max_abs_dev, "passed": self.passed}, indent=2)


def _row(kind, t, s, bin_, values, target):
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    dev = mean - target
    if se > 0:
        z = dev / se
    else:
        z = 0.0 if abs(dev) <= 1e-12 * max(1.0, abs(target)) else float("inf")
    return {"kind": kind, "t": float(t), "s": None if s is None else float(s), "bin": bin_,
            "n": int(n), "mean": mean, "target": float(target), "se": se, "z": float(z)}


def verify_martingale(ens: PathEnsemble, times, conditioning: float | None = None,
                      n_bins: int = 10, min_count: int = 30, z_threshold: float = 3.0) -> MartingaleReport:
    """Check E(v(t)) = u*_f and, given ``conditioning = s``, E(v(t) | v(s)) = v(s) for t < s.

    On-shock paths at ``s`` form one atom bin per live segment; the rest are
    split into equal-count bins of v(s).  Bins with fewer than ``min_count``
    paths are skipped and flagged ``EMPTY_BIN``.
    """
    rep = MartingaleReport(z_threshold=z_threshold)
    for t in times:
        rep.rows.append(_row("mean", t, None, None, ens.velocity(t), ens.u_star_f))
    if conditioning is None:
        return rep
    s = float(conditioning)
    _, vs, on, owner = ens._state(s)
    bins = []
    for k in np.unique(owner[on]):
        bins.append((f"atom:{int(k)}", on & (owner == k)))
    off = np.nonzero(~on)[0]
    if off.size:
        order = off[np.argsort(vs[off], kind="stable")]
        for j, chunk in enumerate(np.array_split(order, n_bins)):
            m = np.zeros(len(ens), dtype=bool)
            m[chunk] = True
            bins.append((f"q{j}", m))
    for t in times:
        if t >= s:
            continue
        vt = ens.velocity(t)
        for name, m in bins:
            cnt = int(m.sum())
            if cnt < min_count:
                rep.flags.append(f"EMPTY_BIN {name} at t={t:g} (n={cnt})")
                continue
            # comparing v(t) - v(s) keeps the within-bin spread of v(s) out of the error bar
            rep.rows.append(_row("conditional", t, s, name, vt[m] - vs[m], 0.0))
    return rep
