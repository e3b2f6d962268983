import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from burgerslab.dissipation import (EntropyPair, bregman, delta_psi_profile, eulerian_rate,
                                    instantaneous_rate, lagrangian_anomaly)
from burgerslab.entropy_core import EntropySolution
from burgerslab.initial import InitialVelocity

NAMES = ["momentum", "energy", "square", "quartic", "abs"]
ENERGY = EntropyPair.builtin("energy")


def test_bregman_examples():
    assert bregman(ENERGY, 1.0, 3.0) == pytest.approx(2.0)
    assert bregman(ENERGY, 0.7, 0.7) == 0.0
    assert bregman(EntropyPair.builtin("quartic"), 1.0, 0.0) == pytest.approx(1.0)
    # subgradient toward u* keeps the kinked entropy nonnegative
    assert bregman(EntropyPair.builtin("abs"), 1.0, 0.0) == 0.0
    assert bregman(EntropyPair.builtin("abs"), -1.0, 0.0) == 0.0


@pytest.mark.parametrize("name", NAMES)
def test_pair_consistency(name):
    pair = EntropyPair.builtin(name)
    a, b = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-2, 2, 21))
    assert np.all(pair.psi(0.5 * (a + b)) <= 0.5 * (pair.psi(a) + pair.psi(b)) + 1e-12)
    u = np.array([-1.3, -0.4, 0.3, 1.1])
    h = 1e-6
    dJ = (pair.flux_J(u + h) - pair.flux_J(u - h)) / (2 * h)
    assert np.allclose(dJ, u * pair.psi_prime(u), atol=1e-6)
    assert pair.integral(-1.0, 0.5) == pytest.approx(quad(lambda v: float(pair.psi(v)), -1.0, 0.5)[0])


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(NAMES[1:]), st.floats(-3, 3), st.floats(-3, 3))
def test_bregman_nonnegative(name, us, u):
    assert bregman(EntropyPair.builtin(name), us, u) >= -1e-12


def _solutions(riemann, ramp, sawtooth, twodip):
    return [(riemann, 1.0), (ramp, 1.7), (sawtooth, 1.3), (twodip, 0.7), (twodip, 2.0)]


def test_energy_anomaly_riemann(riemann):
    assert instantaneous_rate(riemann, ENERGY, 1.0).total == pytest.approx(-2 / 3, abs=1e-10)
    assert eulerian_rate(riemann, ENERGY, 2.5) == pytest.approx(-2 / 3, abs=1e-12)
    assert lagrangian_anomaly(riemann, ENERGY, 1.0) == pytest.approx(-2 / 3, abs=1e-10)
    stationary = EntropySolution(InitialVelocity.riemann(1.5, -1.5))
    assert eulerian_rate(stationary, ENERGY, 1.0) == pytest.approx(-2 / 3 * 1.5 ** 3)


def test_rates_agree_and_have_sign(riemann, ramp, sawtooth, twodip):
    for sol, t in _solutions(riemann, ramp, sawtooth, twodip):
        for name in NAMES:
            pair = EntropyPair.builtin(name)
            rep = instantaneous_rate(sol, pair, t)
            eul = eulerian_rate(sol, pair, t)
            assert abs(rep.total - eul) <= 1e-6 * max(1.0, abs(eul))
            if name == "momentum":
                assert abs(rep.total) <= 1e-10
                assert abs(lagrangian_anomaly(sol, pair, t)) <= 1e-10
            else:
                assert all(c <= 1e-10 for _, c in rep.per_shock)


def test_sawtooth_energy_rate(sawtooth):
    # jump 2L/t, so the rate is -(2L/t)^3 / 12
    for t in (0.8, 2.0):
        assert instantaneous_rate(sawtooth, ENERGY, t).total == pytest.approx(-(2 / t) ** 3 / 12)


def test_rarefaction_control():
    fan = EntropySolution(InitialVelocity.riemann(-1.0, 1.0, allow_rarefaction=True))
    assert fan.shocks_at(1.0) == []
    assert lagrangian_anomaly(fan, ENERGY, 1.0) == 0.0


@pytest.mark.parametrize("fixture,t_end", [("ramp", 1.5), ("twodip", 2.0)])
def test_lagrangian_is_time_integral_of_rate(request, fixture, t_end):
    sol = request.getfixturevalue(fixture)
    # the rate jumps at mergers, so integrate between consecutive events
    events = [t for t in sol.tree.event_times() if t < t_end] + [t_end]
    total = 0.0
    for lo, hi in zip(events[:-1], events[1:]):
        ts = np.linspace(lo + 1e-9, hi - 1e-9, 1001)
        total += np.trapezoid([eulerian_rate(sol, ENERGY, t) for t in ts], ts)
    lag = lagrangian_anomaly(sol, ENERGY, t_end)
    assert lag < 0
    assert lag == pytest.approx(total, abs=1e-5)


def test_delta_psi_endpoints(riemann, ramp):
    pair = EntropyPair.builtin("quartic")
    a, b = ramp.shock_interval(0, 2.0)
    s = np.array([0.2, 0.9, 2.0])
    prof = delta_psi_profile(ramp, pair, 0, s)
    plain = quad(lambda q: float(pair.psi(ramp.initial.velocity(q))), a, b, points=[-1, 1])[0]
    assert prof[:2] == pytest.approx([plain, plain])
    seg = ramp.shock(0)
    assert prof[2] == pytest.approx(2.0 * pair.integral(seg.u_plus(2.0), seg.u_minus(2.0)))
    mom = delta_psi_profile(riemann, EntropyPair.builtin("momentum"), 0, np.linspace(0, 1.5, 20))
    assert np.ptp(mom) <= 1e-12


@pytest.mark.parametrize("fixture,t", [("ramp", 2.5), ("twodip", 2.4)])
def test_delta_psi_monotone(request, fixture, t):
    sol = request.getfixturevalue(fixture)
    shock = sol.shocks_at(t)[0]
    s = np.linspace(sol.t0, t, 200)
    for name in ("square", "quartic", "abs"):
        d = delta_psi_profile(sol, EntropyPair.builtin(name), shock.id, s)
        assert np.max(np.diff(d)) <= 1e-8
