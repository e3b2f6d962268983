import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from burgerslab.initial import InitialVelocity
from burgerslab.viscous import (TransitionDensity, ViscousSolution, finite_difference_velocity,
                                khokhlov_family, khokhlov_inviscid, khokhlov_solution,
                                khokhlov_velocity, limit_measure, retention_decay,
                                stationary_shock_profile)


def test_khokhlov_velocity_examples():
    assert khokhlov_velocity(1.0, 0.3, 0.0, 1.7) == 0.0
    assert khokhlov_velocity(1.0, 1e-9, 0.5, 2.0) == pytest.approx(-0.25)
    assert khokhlov_velocity(1.0, 0.01, 1.0, 1.0) == pytest.approx(1 - math.tanh(50), abs=1e-15)


def test_hopf_cole_examples():
    v = khokhlov_solution(1.0, 0.1, 0.5)
    assert v.hopf_cole_velocity(0.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    w = khokhlov_solution(1.0, 0.05, 0.5)
    assert w.hopf_cole_velocity(2.0, 1.0) == pytest.approx(2.0 - math.tanh(20.0), abs=1e-9)


@pytest.mark.parametrize("nu", [0.05, 0.2])
def test_hopf_cole_matches_closed_form(nu):
    v = khokhlov_solution(1.0, nu, 0.5)
    xs = np.linspace(-2, 2, 41)
    for t in (0.6, 1.0, 2.0):
        assert np.max(np.abs(v.hopf_cole_velocity(xs, t) - khokhlov_velocity(1.0, nu, xs, t))) <= 1e-8


def test_riemann_relaxes_to_stationary_profile():
    u0, nu = 1.0, 0.1
    v = ViscousSolution(InitialVelocity.riemann(u0, -u0), nu)
    xs = np.linspace(-1, 1, 9)
    t = 50 * nu / u0 ** 2
    assert np.max(np.abs(v.velocity(xs, t) - stationary_shock_profile(u0, nu, xs))) <= 1e-4


def test_finite_differences_agree_with_quadrature():
    v = ViscousSolution(InitialVelocity.linear_ramp(-1.0), 0.1)
    xs = np.array([-0.8, -0.2, 0.3, 0.9])
    assert np.max(np.abs(finite_difference_velocity(v, xs, 1.5) - v.velocity(xs, 1.5))) <= 1e-4


def test_transition_density_at_shock_center():
    L, nu, s, t = 1.0, 0.02, 1.0, 2.0
    d = TransitionDensity(khokhlov_solution(L, nu, 0.5), 0.0, t, s)
    a = np.linspace(-0.8, 0.8, 17)
    ref = np.log(np.cosh(L * a / (2 * nu * s))) - t * a * a / (4 * nu * s * (t - s))
    assert np.ptp(d.log_density(a) - ref) <= 1e-9
    assert d.unnormalized_mass == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.6, 1.5), st.floats(0.05, 1.2), st.floats(-1.5, 1.5), st.sampled_from([0.02, 0.1]))
def test_backward_representation(s, dt, x, nu):
    d = TransitionDensity(khokhlov_solution(1.0, nu, 0.5), x, s + dt, s)
    assert abs(d.velocity_identity_residual()) <= 1e-6
    assert d.unnormalized_mass == pytest.approx(1.0, abs=1e-8)


def test_gauge_invariance():
    nu = 0.05
    v0 = khokhlov_solution(1.0, nu, 0.5)
    v1 = khokhlov_solution(1.0, nu, 0.5, potential_offset=3.7)
    d0 = TransitionDensity(v0, 0.3, 2.0, 1.0)
    d1 = TransitionDensity(v1, 0.3, 2.0, 1.0, gamma=lambda t: 5 * t * t - 1)
    a = np.linspace(-0.6, 0.6, 13)
    assert np.max(np.abs(d0.density(a) - d1.density(a))) <= 1e-12 * np.max(d0.density(a))


def test_two_atom_limit_and_retention():
    inv = khokhlov_inviscid(1.0, 0.5)
    lm = limit_measure(khokhlov_family(1.0, 1.0, 2.0, 0.5, t_ref=0.5), inv, 0.0, 1.0, 2.0,
                       [0.05, 0.02, 0.01])
    assert [a for a, _ in lm.atoms] == pytest.approx([-0.5, 0.5])
    assert [w for _, w in lm.atoms] == pytest.approx([0.5, 0.5], abs=0.02)
    slope, _ = retention_decay(khokhlov_family(1.0, 1.0, 2.0, 0.5, t_ref=0.5), 0.0, [0.05, 0.02, 0.01])
    assert slope == pytest.approx(-1.0 * (1 - 0.5) / 4.0, rel=0.05)


def test_regular_point_single_atom():
    inv = khokhlov_inviscid(1.0, 0.5)
    fam = lambda nu: TransitionDensity(khokhlov_solution(1.0, nu, 0.5), 0.8, 2.0, 1.0)
    lm = limit_measure(fam, inv, 0.8, 1.0, 2.0, [0.05, 0.01])
    assert len(lm.atoms) == 1
    loc, w = lm.atoms[0]
    assert loc == pytest.approx(0.8 - (0.8 - 1.0) / 2.0 * 1.0)
    assert w == pytest.approx(1.0, abs=1e-6)


def test_rejects_bad_viscosity():
    from burgerslab.errors import ConfigInvalid
    with pytest.raises(ConfigInvalid):
        ViscousSolution(InitialVelocity.riemann(1, -1), 0.0)
