"""Declarative 1D initial velocity profiles with their potentials.

Four kinds are supported:

``riemann``
    ``u_minus`` for a < 0 and ``u_plus`` for a > 0.
``linear_ramp``
    ``slope * clip(a, -half_width, half_width)``; continuous and bounded.
``sawtooth``
    the zero-viscosity Khokhlov profile ``(a - L sign a) / t_ref`` at the
    reference time ``t_ref > 0``.  With ``nu_smoothing > 0`` the viscous
    profile ``(a - L tanh(L a / 2 nu t_ref)) / t_ref`` is used instead.
``smooth_sampled``
    monotone cubic (PCHIP) interpolation of samples, held constant outside
    the grid.  The potential is the exact antiderivative of the cubic pieces.

``velocity`` and ``derivative`` accept ``side=-1`` / ``side=+1`` to select
left or right limits at discontinuities and kinks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigInvalid, IOFailure

KINDS = ("riemann", "linear_ramp", "sawtooth", "smooth_sampled")


def log_cosh(z):
    """Overflow-free log(cosh(z))."""
    z = np.abs(z)
    return z + np.log1p(np.exp(-2.0 * z)) - np.log(2.0)


@dataclass(frozen=True, eq=False)
class InitialVelocity:
    kind: str
    parameters: dict = field(default_factory=dict)
    potential_offset: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigInvalid(f"unknown initial kind {self.kind!r}")
        p = self.parameters
        try:
            if self.kind == "riemann":
                um, up = float(p["u_minus"]), float(p["u_plus"])
                if not (np.isfinite(um) and np.isfinite(up)):
                    raise ConfigInvalid("riemann states must be finite")
                if um <= up and not p.get("allow_rarefaction", False):
                    raise ConfigInvalid("riemann data needs u_minus > u_plus (set allow_rarefaction)")
            elif self.kind == "linear_ramp":
                float(p["slope"])
                if float(p.get("half_width", 1.0)) <= 0:
                    raise ConfigInvalid("ramp half_width must be positive")
            elif self.kind == "sawtooth":
                if float(p["L"]) <= 0 or float(p["t_ref"]) <= 0:
                    raise ConfigInvalid("sawtooth needs L > 0 and t_ref > 0")
                if float(p.get("nu_smoothing", 0.0)) < 0:
                    raise ConfigInvalid("nu_smoothing must be >= 0")
            else:
                g = np.asarray(p["grid"], dtype=float)
                v = np.asarray(p["values"], dtype=float)
                if g.ndim != 1 or g.shape != v.shape or g.size < 4:
                    raise ConfigInvalid("grid and values must be 1D of equal length >= 4")
                if not np.all(np.diff(g) > 0):
                    raise ConfigInvalid("grid must be strictly ascending")
                if not (np.all(np.isfinite(g)) and np.all(np.isfinite(v))):
                    raise ConfigInvalid("grid/values must be finite")
                interp = PchipInterpolator(g, v, extrapolate=False)
                object.__setattr__(self, "_grid", g)
                object.__setattr__(self, "_vals", v)
                object.__setattr__(self, "_pchip", interp)
                object.__setattr__(self, "_dpchip", interp.derivative())
                object.__setattr__(self, "_ipchip", interp.antiderivative())
                object.__setattr__(self, "_phi_right", float(interp.antiderivative()(g[-1])))
        except KeyError as exc:
            raise ConfigInvalid(f"missing parameter {exc} for kind {self.kind}") from None

    # -- constructors -----------------------------------------------------
    @classmethod
    def riemann(cls, u_minus, u_plus, allow_rarefaction=False, potential_offset=0.0):
        return cls("riemann", {"u_minus": float(u_minus), "u_plus": float(u_plus),
                               "allow_rarefaction": bool(allow_rarefaction)}, potential_offset)

    @classmethod
    def linear_ramp(cls, slope, half_width=1.0, potential_offset=0.0):
        return cls("linear_ramp", {"slope": float(slope), "half_width": float(half_width)},
                   potential_offset)

    @classmethod
    def sawtooth(cls, L, t_ref, nu_smoothing=0.0, potential_offset=0.0):
        return cls("sawtooth", {"L": float(L), "t_ref": float(t_ref),
                                "nu_smoothing": float(nu_smoothing)}, potential_offset)

    @classmethod
    def smooth_sampled(cls, grid, values, potential_offset=0.0):
        return cls("smooth_sampled", {"grid": [float(g) for g in grid],
                                      "values": [float(v) for v in values]}, potential_offset)

    @classmethod
    def from_function(cls, fn, lo, hi, n=1201, potential_offset=0.0):
        grid = np.linspace(lo, hi, n)
        return cls.smooth_sampled(grid, fn(grid), potential_offset)

    # -- far field ----------------------------------------------------------
    @property
    def far_field(self) -> tuple[float, float]:
        """Limits of u0 at -inf and +inf (sawtooth: None, unbounded)."""
        p = self.parameters
        if self.kind == "riemann":
            return float(p["u_minus"]), float(p["u_plus"])
        if self.kind == "linear_ramp":
            k, A = float(p["slope"]), float(p.get("half_width", 1.0))
            return -k * A, k * A
        if self.kind == "smooth_sampled":
            return float(self._vals[0]), float(self._vals[-1])
        return (np.inf, -np.inf)

    @property
    def u_infinity(self) -> float:
        lo, hi = self.far_field
        if not (np.isfinite(lo) and np.isfinite(hi)):
            return 0.0
        return 0.5 * (lo + hi)

    @property
    def is_closed_form(self) -> bool:
        if self.kind == "sawtooth":
            return float(self.parameters.get("nu_smoothing", 0.0)) == 0.0
        return self.kind in ("riemann", "linear_ramp")

    # -- evaluation ---------------------------------------------------------
    def velocity(self, a, side: int = 0):
        a = np.asarray(a, dtype=float)
        p = self.parameters
        if self.kind == "riemann":
            um, up = float(p["u_minus"]), float(p["u_plus"])
            at0 = um if side < 0 else up if side > 0 else 0.5 * (um + up)
            return np.where(a < 0, um, np.where(a > 0, up, at0))
        if self.kind == "linear_ramp":
            k, A = float(p["slope"]), float(p.get("half_width", 1.0))
            return k * np.clip(a, -A, A)
        if self.kind == "sawtooth":
            L, tr, nu = float(p["L"]), float(p["t_ref"]), float(p.get("nu_smoothing", 0.0))
            if nu > 0:
                return (a - L * np.tanh(L * a / (2 * nu * tr))) / tr
            s0 = -1.0 if side < 0 else 1.0 if side > 0 else 0.0
            return (a - L * np.where(a == 0, s0, np.sign(a))) / tr
        g = self._grid
        inside = self._pchip(np.clip(a, g[0], g[-1]))
        return np.where(a < g[0], self._vals[0], np.where(a > g[-1], self._vals[-1], inside))

    def derivative(self, a, side: int = 0):
        a = np.asarray(a, dtype=float)
        p = self.parameters
        if self.kind == "riemann":
            return np.zeros_like(a)
        if self.kind == "linear_ramp":
            k, A = float(p["slope"]), float(p.get("half_width", 1.0))
            inner = np.abs(a) < A
            edge = np.abs(a) == A
            # at the corners the side decides: inward side has slope k
            inward = edge & (((a > 0) & (side < 0)) | ((a < 0) & (side > 0)))
            return np.where(inner | inward, k, 0.0)
        if self.kind == "sawtooth":
            L, tr, nu = float(p["L"]), float(p["t_ref"]), float(p.get("nu_smoothing", 0.0))
            if nu > 0:
                z = L * a / (2 * nu * tr)
                return (1.0 - L * L / (2 * nu * tr) / np.cosh(z) ** 2) / tr
            return np.full_like(a, 1.0 / tr)
        g = self._grid
        inside = self._dpchip(np.clip(a, g[0], g[-1]))
        return np.where((a < g[0]) | (a > g[-1]), 0.0, inside)

    def second_derivative(self, a):
        a = np.asarray(a, dtype=float)
        if self.kind == "smooth_sampled":
            g = self._grid
            inside = self._dpchip.derivative()(np.clip(a, g[0], g[-1]))
            return np.where((a < g[0]) | (a > g[-1]), 0.0, inside)
        h = 1e-4 * max(1.0, self.length_scale)
        return (self.derivative(a + h) - self.derivative(a - h)) / (2 * h)

    def potential(self, a):
        """phi0(a) with phi0' = u0, normalised by ``potential_offset``."""
        a = np.asarray(a, dtype=float)
        p = self.parameters
        c0 = self.potential_offset
        if self.kind == "riemann":
            um, up = float(p["u_minus"]), float(p["u_plus"])
            return np.where(a < 0, um * a, up * a) + c0
        if self.kind == "linear_ramp":
            k, A = float(p["slope"]), float(p.get("half_width", 1.0))
            c = np.clip(a, -A, A)
            return 0.5 * k * c * c + k * A * np.where(a > A, a - A, np.where(a < -A, -(a + A), 0.0)) + c0
        if self.kind == "sawtooth":
            L, tr, nu = float(p["L"]), float(p["t_ref"]), float(p.get("nu_smoothing", 0.0))
            if nu > 0:
                return a * a / (2 * tr) - 2 * nu * log_cosh(L * a / (2 * nu * tr)) + c0
            return (a * a / 2 - L * np.abs(a)) / tr + c0
        g = self._grid
        inside = self._ipchip(np.clip(a, g[0], g[-1]))
        left = self._vals[0] * (a - g[0])
        right = self._phi_right + self._vals[-1] * (a - g[-1])
        return np.where(a < g[0], left, np.where(a > g[-1], right, inside)) + c0

    def kinks(self) -> list[float]:
        """Labels where u0 or u0' is not smooth (quadrature breakpoints)."""
        p = self.parameters
        if self.kind == "riemann":
            return [0.0]
        if self.kind == "linear_ramp":
            A = float(p.get("half_width", 1.0))
            return [-A, A]
        if self.kind == "sawtooth":
            return [] if float(p.get("nu_smoothing", 0.0)) > 0 else [0.0]
        return [float(self._grid[0]), float(self._grid[-1])]

    @property
    def length_scale(self) -> float:
        p = self.parameters
        if self.kind == "linear_ramp":
            return float(p.get("half_width", 1.0))
        if self.kind == "sawtooth":
            return float(p["L"])
        if self.kind == "smooth_sampled":
            return float(self._grid[-1] - self._grid[0]) / 10.0
        return 1.0

    def speed_bound(self, lo: float, hi: float) -> float:
        """Upper bound of |u0| on the label window [lo, hi]."""
        p = self.parameters
        if self.kind == "riemann":
            return max(abs(float(p["u_minus"])), abs(float(p["u_plus"])))
        if self.kind == "linear_ramp":
            return abs(float(p["slope"])) * float(p.get("half_width", 1.0))
        if self.kind == "sawtooth":
            return (max(abs(lo), abs(hi)) + float(p["L"])) / float(p["t_ref"])
        return float(np.max(np.abs(self._vals)))

    def piece(self, a: float):
        """(left knot, right knot, cubic coefficients) of the sampled piece holding ``a``."""
        g = self._grid
        k = int(np.clip(np.searchsorted(g, a, side="right") - 1, 0, g.size - 2))
        return float(g[k]), float(g[k + 1]), self._pchip.c[:, k].copy()

    def compression_points(self) -> list[tuple[float, float]]:
        """Local minima (label, u0') of u0' with u0' < 0."""
        p = self.parameters
        if self.kind == "riemann":
            return [(0.0, -np.inf)] if float(p["u_minus"]) > float(p["u_plus"]) else []
        if self.kind == "linear_ramp":
            k = float(p["slope"])
            return [(0.0, k)] if k < 0 else []
        if self.kind == "sawtooth":
            d0 = float(self.derivative(0.0))
            if float(p.get("nu_smoothing", 0.0)) == 0:
                return [(0.0, -np.inf)]
            return [(0.0, d0)] if d0 < 0 else []
        return _sampled_compression_points(self)

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        params = {}
        for k, v in self.parameters.items():
            params[k] = [float(x) for x in v] if isinstance(v, (list, tuple, np.ndarray)) else v
        return {"kind": self.kind, "parameters": params,
                "potential_offset": float(self.potential_offset)}

    @classmethod
    def from_dict(cls, data: dict) -> "InitialVelocity":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigInvalid("initial data needs a 'kind' key")
        params = dict(data.get("parameters", {}))
        for k in ("grid", "values"):
            if k in data and k not in params:
                params[k] = data[k]
        return cls(str(data["kind"]), params, float(data.get("potential_offset", 0.0)))


def _sampled_compression_points(u0: InitialVelocity):
    """Local minima of the piecewise-quadratic PCHIP derivative, found exactly."""
    g = u0._grid
    c = u0._pchip.c  # c[0] s^3 + c[1] s^2 + c[2] s + c[3] on each piece
    h = np.diff(g)
    cands = []
    for k in range(h.size):
        if c[0, k] > 0:
            s = -c[1, k] / (3.0 * c[0, k])
            if 0.0 < s < h[k]:
                cands.append(g[k] + s)
    # minima of u0' sitting on a knot, where u0'' changes sign from - to +
    left = 6.0 * c[0, :-1] * h[:-1] + 2.0 * c[1, :-1]
    right = 2.0 * c[1, 1:]
    for k in np.nonzero((left < 0) & (right > 0))[0]:
        cands.append(g[k + 1])
    out = []
    for a_c in sorted(cands):
        d = float(u0.derivative(a_c))
        if d < 0:
            out.append((float(a_c), d))
    return out


def load_initial(path) -> InitialVelocity:
    """Read initial data from a YAML or JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        import yaml

        data = yaml.safe_load(text)
    return InitialVelocity.from_dict(data)
