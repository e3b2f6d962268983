"""Monte Carlo for the stochastic backward flows and the escape diagnostics.

Trajectory noise has diffusivity ``kappa`` and the velocity field viscosity
``nu``; Pr = nu / kappa.  Paths are integrated by the kernels in
``sde_kernels`` with one counter-based noise stream per path, so results do
not depend on the number of worker threads.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri

from . import sde_kernels as K
from .errors import ConfigInvalid, IOFailure, StepTooCoarse, VarianceBlowup
from .initial import InitialVelocity, log_cosh
from .rng import path_keys, uniforms
from .viscous import ViscousSolution, khokhlov_potential, khokhlov_velocity

SOURCES = ("khokhlov", "stationary_shock", "hopf_cole")
_INIT_COUNTER = 1 << 40   # counter block reserved for initial-position draws


def binomial_error(p: float, n: int) -> float:
    """Normal-approximation standard error with a continuity correction of 1/(2n)."""
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) + 0.5 / n


def alpha_stationary(pr: float) -> float:
    return 1.0 if pr <= 1.0 else 1.0 / pr


def alpha_khokhlov(pr: float) -> float:
    return 1.0 if pr <= 0.5 else 1.0 / (2.0 * pr)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class SdeConfig:
    """Backward stochastic flow from (x, t) down to time s.

    ``step_count`` coarse steps span t - s.  ``dt_fine`` is the step inside
    the viscous layer; by default it is nu / (10 sup|u|^2).
    """

    velocity_source: str
    nu: float
    kappa: float
    x: float
    t: float
    s: float
    n_paths: int = 10_000
    master_seed: int = 0
    step_count: int = 100
    dt_fine: float | None = None
    L: float = 1.0
    u0: float = 1.0
    initial: InitialVelocity | None = None
    t0: float = 0.0
    geometric_fallback: bool = False
    table_nx: int = 401
    table_ns: int = 21

    @property
    def prandtl(self) -> float:
        return self.nu / self.kappa if self.kappa > 0 else math.inf

    def speed_sup(self) -> float:
        if self.velocity_source == "stationary_shock":
            return abs(self.u0)
        if self.velocity_source == "khokhlov":
            spread = 6.0 * math.sqrt(2.0 * self.kappa * (self.t - self.s))
            return (self.L + abs(self.x) + spread) / self.s
        return self.initial.speed_bound(self.x - 1.0, self.x + 1.0)

    def dt_bound(self) -> float:
        b = 1e-2 * (self.t - self.s)
        if self.nu > 0:
            b = min(b, self.nu / (10.0 * self.speed_sup() ** 2))
        return b

    def steps(self) -> tuple[float, float]:
        """(fine, coarse) step sizes after validation."""
        self.validate()
        coarse = (self.t - self.s) / self.step_count
        fine = self.dt_fine if self.dt_fine is not None else min(coarse, self.dt_bound())
        if self.nu > 0 and fine > self.dt_bound() * (1 + 1e-12):
            raise StepTooCoarse(f"layer step {fine:.3g} exceeds bound {self.dt_bound():.3g}")
        return fine, coarse

    def validate(self) -> None:
        if self.velocity_source not in SOURCES:
            raise ConfigInvalid(f"velocity_source must be one of {SOURCES}")
        if self.nu < 0 or self.kappa < 0:
            raise ConfigInvalid("nu and kappa must be non-negative")
        if self.kappa == 0 and not self.geometric_fallback:
            raise ConfigInvalid("kappa = 0 needs geometric_fallback")
        if not self.s < self.t:
            raise ConfigInvalid("need s < t")
        if self.velocity_source == "khokhlov" and (self.nu <= 0 or self.s <= 0):
            raise ConfigInvalid("the Khokhlov source needs nu > 0 and s > 0")
        if self.velocity_source == "hopf_cole" and (self.initial is None or self.nu <= 0):
            raise ConfigInvalid("the Hopf-Cole source needs initial data and nu > 0")
        if self.step_count < 100:
            raise StepTooCoarse("step_count must be at least 100 so that dt <= (t - s)/100")
        if self.n_paths < 1:
            raise ConfigInvalid("n_paths must be positive")

    def velocity(self, x, s):
        """The driving velocity field u(x, s)."""
        if self.velocity_source == "khokhlov":
            return khokhlov_velocity(self.L, self.nu, x, s)
        if self.velocity_source == "stationary_shock":
            x = np.asarray(x, dtype=float)
            if self.nu > 0:
                return -self.u0 * np.tanh(self.u0 * x / (2.0 * self.nu))
            return -self.u0 * np.sign(x)
        return self._viscous().velocity(x, s) if s > self.t0 else self.initial.velocity(x)

    def _viscous(self) -> ViscousSolution:
        if not hasattr(self, "_vs"):
            self._vs = ViscousSolution(self.initial, self.nu, self.t0)
        return self._vs

    def header(self) -> dict:
        fine, coarse = self.steps()
        return {"seed": self.master_seed, "dt_fine": fine, "dt_coarse": coarse, "n": self.n_paths,
                "nu": self.nu, "kappa": self.kappa, "Pr": self.prandtl}


@dataclass
class SdeEnsemble:
    config: SdeConfig
    times: np.ndarray        # physical times s' at which positions were recorded
    positions: np.ndarray    # shape (n, len(times))
    steps: np.ndarray

    @property
    def endpoints(self) -> np.ndarray:
        return self.positions[:, -1]

    def to_csv(self, path) -> None:
        try:
            with open(path, "w", newline="") as fh:
                fh.write("# " + json.dumps(self.config.header()) + "\n")
                w = csv.writer(fh)
                w.writerow(["path"] + [f"x_at_{t!r}" for t in self.times])
                for i, row in enumerate(self.positions):
                    w.writerow([i] + [repr(float(v)) for v in row])
        except OSError as exc:
            raise IOFailure(str(exc)) from exc


def _tabulate(cfg: SdeConfig):
    """Velocity table on an (x, s) grid covering the path envelope."""
    tau = cfg.t - cfg.s
    reach = tau * cfg.speed_sup() + 8.0 * math.sqrt(2.0 * cfg.kappa * tau) + 0.5
    xs = np.linspace(cfg.x - reach, cfg.x + reach, cfg.table_nx)
    ss = np.linspace(cfg.s, cfg.t, cfg.table_ns)
    table = np.empty((xs.size, ss.size))
    for j, s in enumerate(ss):
        table[:, j] = cfg.velocity(xs, s)
    p = [cfg.t, xs[0], xs[1] - xs[0], xs.size, ss[0], ss[1] - ss[0], ss.size]
    return p, table


def integrate_backward(cfg: SdeConfig, times=None, jobs: int = 1, start: int = 0) -> SdeEnsemble:
    """Euler-Maruyama for the backward flow from (x, t), recorded at physical times.

    ``times`` are physical times in [s, t]; the default records only s.
    Paths ``start .. start + n_paths - 1`` of the master stream are drawn.
    """
    fine, coarse = cfg.steps()
    times = np.array([cfg.s] if times is None else sorted(times, reverse=True), dtype=float)
    if times.min() < cfg.s or times.max() > cfg.t:
        raise ConfigInvalid("recording times must lie in [s, t]")
    out_sig = cfg.t - times
    keys = path_keys(cfg.master_seed, np.arange(start, start + cfg.n_paths))
    table = None
    if cfg.velocity_source == "khokhlov":
        model, p = K.KHOKHLOV_BACKWARD, [cfg.L, cfg.nu, cfg.t]
    elif cfg.velocity_source == "stationary_shock":
        model, p = K.STATIONARY, [cfg.u0, cfg.nu, 1.0]
    else:
        model = K.TABULATED
        p, table = _tabulate(cfg)
        coarse = fine
    X, _, steps = K.run_paths(model, p, cfg.kappa, cfg.x, keys, out_sig, fine, coarse, table, jobs=jobs)
    return SdeEnsemble(cfg, times, X, steps)


def ci_fixed_point(cfg: SdeConfig, jobs: int = 1) -> dict:
    """Mean of u(endpoint, s) against u(x, t), with its standard error."""
    ens = integrate_backward(cfg, jobs=jobs)
    v = np.asarray(cfg.velocity(ens.endpoints, cfg.s), dtype=float)
    target = float(cfg.velocity(cfg.x, cfg.t))
    mean, se = float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size))
    return {"x": cfg.x, "t": cfg.t, "s": cfg.s, "mean": mean, "std_error": se, "target": target,
            "z": (mean - target) / se if se > 0 else 0.0}


def martingale_by_simulation(cfg: SdeConfig, times, jobs: int = 1) -> list[dict]:
    """E u(xi(s'), s') at each recording time; constant in s' for a backward martingale."""
    ens = integrate_backward(cfg, times=times, jobs=jobs)
    rows = []
    for j, s in enumerate(ens.times):
        v = np.asarray(cfg.velocity(ens.positions[:, j], s), dtype=float) if s < cfg.t \
            else np.full(cfg.n_paths, float(cfg.velocity(cfg.x, cfg.t)))
        rows.append({"s": float(s), "mean": float(np.mean(v)),
                     "std_error": float(np.std(v, ddof=1) / math.sqrt(v.size))})
    return rows


# ---------------------------------------------------------------------------
# escape from the shock
# ---------------------------------------------------------------------------

@dataclass
class EscapeReport:
    threshold: float
    empirical_probability: float
    std_error: float
    chebyshev_bound: float
    alpha: float
    left_fraction: float
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.empirical_probability >= 1.0 - self.chebyshev_bound - 3.0 * self.std_error

    def to_json(self) -> str:
        d = asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, indent=2)


def escape_probability(u0: float, pr: float, kappa: float, t: float, epsilon: float,
                       n: int = 100_000, seed: int = 0, step_count: int = 100,
                       dt_fine: float | None = None, jobs: int = 1) -> EscapeReport:
    """P(|xi(t)| >= alpha (1 - eps) u0 t) for the reversed stationary shock started at 0."""
    nu = pr * kappa
    alpha = alpha_stationary(pr)
    coarse = t / step_count
    if dt_fine is None:
        # at nu = 0 the noise-dominated region |x| < kappa/u0 plays the layer's role
        scale = nu if nu > 0 else kappa
        dt_fine = min(coarse, scale / (10.0 * u0 * u0))
    if nu > 0 and dt_fine > nu / (10.0 * u0 * u0) * (1 + 1e-12):
        raise StepTooCoarse("layer step exceeds nu / (10 u0^2)")
    keys = path_keys(seed, np.arange(n))
    X, _, steps = K.run_paths(K.STATIONARY, [u0, nu, 1.0], kappa, 0.0, keys, [t], dt_fine, coarse,
                              jobs=jobs)
    xf = X[:, 0]
    thr = alpha * (1.0 - epsilon) * u0 * t
    p = float(np.mean(np.abs(xf) >= thr))
    bound = kappa / (epsilon ** 2 * alpha ** 2 * u0 ** 2 * t)
    meta = {"seed": seed, "dt_fine": dt_fine, "dt_coarse": coarse, "n": n, "nu": nu,
            "kappa": kappa, "Pr": pr, "mean_steps": float(np.mean(steps))}
    return EscapeReport(thr, p, binomial_error(p, n), bound, alpha, float(np.mean(xf < 0)), meta)


def phi_star(L: float, x):
    """Limiting Khokhlov potential -L|x| + x^2/2."""
    x = np.asarray(x, dtype=float)
    return -L * np.abs(x) + 0.5 * x * x


def khokhlov_escape(L: float, pr: float, kappa: float, tau_horizon: float, epsilon: float,
                    n: int = 100_000, seed: int = 0, tf: float = 1.0, step_count: int = 100,
                    jobs: int = 1) -> EscapeReport:
    """Escape in log-time tau = log(tf / s) for the Khokhlov backward flow.

    The event is phi*(xi(tau)) <= -alpha (1 - eps) L^2 (1 - e^{-2 tau}) / 2,
    which the two deterministic limits +-L(1 - e^{-tau}) satisfy at eps = 0
    with alpha = 1.
    """
    nu = pr * kappa
    if nu <= 0:
        raise ConfigInvalid("Khokhlov escape needs nu > 0")
    alpha = alpha_khokhlov(pr)
    coarse = tau_horizon / step_count
    fine = min(coarse, nu * tf * math.exp(-tau_horizon) / (10.0 * L * L))
    keys = path_keys(seed, np.arange(n))
    X, _, steps = K.run_paths(K.KHOKHLOV_LOGTIME, [L, nu, tf], kappa, 0.0, keys, [tau_horizon],
                              fine, coarse, jobs=jobs)
    xf = X[:, 0]
    thr = -0.5 * alpha * (1.0 - epsilon) * L * L * (1.0 - math.exp(-2.0 * tau_horizon))
    p = float(np.mean(phi_star(L, xf) <= thr))
    # Chebyshev-type bound in the same units, kept for reporting only
    bound = kappa * tf / (epsilon ** 2 * alpha ** 2 * L ** 2)
    meta = {"seed": seed, "dt_fine": fine, "dt_coarse": coarse, "n": n, "nu": nu, "kappa": kappa,
            "Pr": pr, "tf": tf, "tau_horizon": tau_horizon, "mean_steps": float(np.mean(steps))}
    return EscapeReport(thr, p, binomial_error(p, n), bound, alpha, float(np.mean(xf < 0)), meta)


def escape_scales(pr: float, kappa: float, u0: float) -> tuple[float, float]:
    """(tau_esc, ell_esc) = (max(kappa, nu)/u0^2, alpha^{-1/2} kappa/u0)."""
    if pr <= 0:
        raise ConfigInvalid("escape scales need Pr > 0")
    nu = pr * kappa
    return max(kappa, nu) / u0 ** 2, alpha_stationary(pr) ** -0.5 * kappa / u0


def half_escape_time(pr: float, kappa: float, u0: float = 1.0, n: int = 20_000, seed: int = 0,
                     distance_factor: float = 4.0, n_times: int = 400, jobs: int = 1) -> float:
    """First time at which P(|xi| >= distance_factor * ell_esc) reaches 1/2."""
    tau_esc, ell = escape_scales(pr, kappa, u0)
    horizon = 40.0 * distance_factor * tau_esc
    ts = np.linspace(horizon / n_times, horizon, n_times)
    nu = pr * kappa
    dt = min(nu, kappa) / (10.0 * u0 * u0)
    keys = path_keys(seed, np.arange(n))
    X, _, _ = K.run_paths(K.STATIONARY, [u0, nu, 1.0], kappa, 0.0, keys, ts, dt, dt, jobs=jobs)
    frac = np.mean(np.abs(X) >= distance_factor * ell, axis=0)
    j = int(np.argmax(frac >= 0.5))
    if frac[j] < 0.5:
        return math.nan
    if j == 0:
        return float(ts[0])
    f0, f1 = frac[j - 1], frac[j]
    return float(ts[j - 1] + (0.5 - f0) / (f1 - f0) * (ts[j] - ts[j - 1]))


def half_escape_scaling(pr: float, kappas, u0: float = 1.0, n: int = 20_000, seed: int = 0,
                        jobs: int = 1) -> dict:
    """Linear fit of the empirical half-escape time against kappa."""
    ks = np.asarray(kappas, dtype=float)
    th = np.array([half_escape_time(pr, k, u0, n, seed, jobs=jobs) for k in ks])
    slope, icpt = np.polyfit(ks, th, 1)
    pred = slope * ks + icpt
    ss_res = float(np.sum((th - pred) ** 2))
    ss_tot = float(np.sum((th - th.mean()) ** 2))
    return {"kappa": ks.tolist(), "half_time": th.tolist(), "slope": float(slope),
            "intercept": float(icpt), "r2": 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0}


# ---------------------------------------------------------------------------
# fluctuation identity
# ---------------------------------------------------------------------------

@dataclass
class FluctuationReport:
    mean_exp_w: float
    jackknife_error: float
    mean_w: float
    std_error_w: float
    printed_form_mean_exp_w: float
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return abs(self.mean_exp_w - 1.0) <= 3.0 * self.jackknife_error and self.mean_w <= 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, indent=2)


def jackknife_mean(values) -> tuple[float, float]:
    """Delete-one jackknife estimate and standard error of a mean."""
    v = np.asarray(values, dtype=float)
    n = v.size
    loo = (v.sum() - v) / (n - 1)
    est = float(v.mean())
    err = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return est, err


def _fluctuation(model, p, nu, phi, t_start, t_end, rho0, rho_f, n, seed, dt, var_cap, jobs):
    keys = path_keys(seed, np.arange(n))
    x0 = rho0.ppf(uniforms(keys, _INIT_COUNTER))
    X, acc, steps = K.run_paths(model, p, nu, x0, keys, [t_end - t_start], dt, dt, jobs=jobs)
    xf = X[:, 0]
    boundary = (phi(x0, t_start) - phi(xf, t_end)) / nu
    dens = rho_f.logpdf(xf) - rho0.logpdf(x0)
    w = boundary + dens + acc / nu
    printed = -boundary - dens + acc / nu
    ew = np.exp(w)
    var = float(np.var(ew, ddof=1))
    if var > var_cap:
        raise VarianceBlowup(f"variance of e^W is {var:.3g} > cap {var_cap:.3g}")
    m, err = jackknife_mean(ew)
    meta = {"seed": seed, "dt": dt, "n": n, "nu": nu, "kappa": nu, "Pr": 1.0,
            "t_start": t_start, "t_end": t_end, "var_exp_w": var}
    return FluctuationReport(m, err, float(w.mean()), float(w.std(ddof=1) / math.sqrt(n)),
                             float(np.mean(np.exp(printed))), meta)


def fluctuation_check(v: ViscousSolution, rho0, rho_f, t_end: float, n_paths: int = 10_000,
                      seed: int = 0, dt: float | None = None, var_cap: float = 1e6,
                      jobs: int = 1) -> FluctuationReport:
    """E exp(W) for the forward viscous flow dX = u dt + sqrt(2 nu) dW on Khokhlov data.

    ``rho0`` and ``rho_f`` are frozen scipy distributions (``ppf``/``logpdf``).
    W = [phi(X(t0), t0) - phi(X(tf), tf)]/nu + int d phi/dt dt / nu
        + log rho_f(X(tf)) - log rho0(X(t0)),
    the log ratio of reversed to forward path weights.
    ``printed_form_mean_exp_w`` reports the variant with the boundary and
    density terms negated, for comparison.
    """
    if not v.khokhlov:
        raise ConfigInvalid("fluctuation_check needs the Khokhlov solution (closed-form phi)")
    L, nu, t0 = float(v.initial.parameters["L"]), v.nu, v.t0
    if dt is None:
        dt = min(1e-2 * (t_end - t0), nu / (10.0 * (L / t0) ** 2))

    def phi(x, t):
        return khokhlov_potential(L, nu, x, t)

    return _fluctuation(K.KHOKHLOV_FORWARD, [L, nu, t0], nu, phi, t0, t_end, rho0, rho_f,
                        n_paths, seed, dt, var_cap, jobs)


def stationary_fluctuation_check(u0: float, nu: float, duration: float, rho0, rho_f,
                                 n_paths: int = 10_000, seed: int = 0, dt: float | None = None,
                                 var_cap: float = 1e6, jobs: int = 1) -> FluctuationReport:
    """Same identity in the steady shock u = -u0 tanh(u0 x / 2 nu), where d phi/dt = 0."""
    if dt is None:
        dt = min(1e-2 * duration, nu / (10.0 * u0 * u0))

    def phi(x, t):
        return -2.0 * nu * log_cosh(u0 * np.asarray(x) / (2.0 * nu))

    return _fluctuation(K.STATIONARY, [u0, nu, -1.0], nu, phi, 0.0, duration, rho0, rho_f,
                        n_paths, seed, dt, var_cap, jobs)


def initial_positions(rho0, seed: int, n: int) -> np.ndarray:
    """Draws from ``rho0`` on the reserved counter block (for tests and exports)."""
    return rho0.ppf(uniforms(path_keys(seed, np.arange(n)), _INIT_COUNTER))


def standard_normal_check(seed: int, n: int) -> np.ndarray:
    return ndtri(uniforms(path_keys(seed, np.arange(n)), _INIT_COUNTER))
