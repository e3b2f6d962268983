import csv
import io
import json

import numpy as np
import pytest

from burgerslab.dissipation import EntropyPair
from burgerslab.entropy_core import EntropySolution
from burgerslab.initial import InitialVelocity
from burgerslab.transport import (Profile, atom_table_json, bump_family, evolve_density,
                                  evolve_scalar, momentum_anomaly, scalar_anomaly,
                                  scalar_invariant, shock_mass, transport_csv, transport_table,
                                  weak_residual)

RHO_KH = Profile.two_sided(2.0, 0.5, -3, 3)
IDENT = Profile.from_function(lambda a: a, -5, 5, deriv=np.ones_like)
SQUARE = EntropyPair.builtin("square")


@pytest.fixture(scope="module")
def smooth():
    u0 = InitialVelocity.from_function(lambda a: -np.tanh(a), -6, 6)
    sol = EntropySolution(u0, 0.0, 3.0)
    rho0 = Profile.from_function(lambda a: np.exp(-a * a / 4) * (1 + 0.2 * a), -6, 6)
    th0 = Profile.from_function(lambda a: np.sin(a) + 0.5 * a, -6, 6)
    return sol, rho0, th0


def test_khokhlov_density(sawtooth):
    for t in (0.7, 2.0):
        m = evolve_density(RHO_KH, sawtooth, t)
        assert m.continuous(np.array([-0.3 - (1 - 0.5 / t), 0.4 + (1 - 0.5 / t)])) == \
            pytest.approx([2.0 * 0.5 / t, 0.5 * 0.5 / t])
        assert m.total_mass() - m.initial_mass() == pytest.approx(0, abs=1e-12)
        assert m.total_mass("label") - m.initial_mass() == pytest.approx(0, abs=1e-12)


def test_khokhlov_momentum_anomaly(sawtooth):
    swapped = Profile.two_sided(0.5, 2.0, -3, 3)
    for t in (0.7, 1.0, 2.0):
        pred = (0.5 - 2.0) * (0.5 / t) * (1 / t) ** 2
        row = momentum_anomaly(evolve_density(RHO_KH, sawtooth, t))[0]
        assert row.anomaly == pytest.approx(pred, abs=1e-10)
        assert row.flux_balance == pytest.approx(pred, abs=1e-6)
        assert momentum_anomaly(evolve_density(swapped, sawtooth, t))[0].anomaly == pytest.approx(-pred)
        sym = momentum_anomaly(evolve_density(Profile.constant(1.0, -3, 3), sawtooth, t))[0]
        assert sym.anomaly == pytest.approx(0.0, abs=1e-12)


def test_riemann_mass_and_rate(riemann):
    rho = Profile.constant(1.0, -5, 5)
    m = evolve_density(rho, riemann, 1.3)
    assert m.atoms[0].mass == pytest.approx(2.6)
    assert m.mass_rate(0) == pytest.approx(2.0)
    assert shock_mass(rho, riemann, 0, 0.4) == pytest.approx(0.8)


def test_no_atoms_before_formation(ramp):
    m = evolve_density(Profile.constant(1.0, -3, 3), ramp, 0.5)
    assert m.atoms == []
    # pure change of variables: rho(x) = rho0(a) / (1 + t u0'(a)) = 1 / 0.5
    assert m.continuous(np.array([0.1]))[0] == pytest.approx(2.0)


def test_scalar_field_values(riemann, sawtooth):
    th = evolve_scalar(IDENT, riemann, 1.0)
    assert th.shock_value(riemann.shock(0)) == pytest.approx(0.0, abs=1e-14)
    c = evolve_scalar(Profile.constant(0.7, -5, 5), riemann, 1.0)
    assert c(np.array([-0.5, 0.5])) == pytest.approx([0.7, 0.7])
    u0 = sawtooth.initial
    vel = Profile.from_function(lambda a: u0.velocity(a), -3, 3, breaks=(0.0,))
    f = evolve_scalar(vel, sawtooth, 1.5)
    assert f.shock_value(sawtooth.shock(0)) == pytest.approx(sawtooth.shock(0).u_star(1.5), abs=1e-12)


def test_scalar_anomaly_examples(riemann):
    one = Profile.constant(1.0, -5, 5)
    sa = scalar_anomaly(one, IDENT, riemann, SQUARE, 1.3)
    assert sa.lagrangian == pytest.approx(-2 / 3 * 1.3 ** 3, abs=1e-10)
    assert sa.integrated_rate == pytest.approx(sa.lagrangian, abs=1e-6)
    mom = EntropyPair.builtin("momentum")
    assert scalar_anomaly(one, IDENT, riemann, mom, 1.3).lagrangian == pytest.approx(0, abs=1e-12)
    skew = Profile.from_function(lambda a: 1 + 0.3 * np.tanh(a), -5, 5)
    sine = Profile.from_function(np.sin, -5, 5)
    assert abs(scalar_anomaly(skew, sine, riemann, mom, 1.3, integrate=False).lagrangian) > 1e-3


def test_invariant_before_and_after_the_shock(smooth):
    sol, rho0, th0 = smooth
    t_star = min(r.t_star for r in sol.tree.segments)
    j0 = scalar_invariant(evolve_density(rho0, sol, 0.0), evolve_scalar(th0, sol, 0.0), SQUARE)
    for t in np.linspace(0.2, 0.95 * t_star, 4):
        j = scalar_invariant(evolve_density(rho0, sol, t), evolve_scalar(th0, sol, t), SQUARE)
        assert j == pytest.approx(j0, abs=1e-8)
    t = 2.0
    j = scalar_invariant(evolve_density(rho0, sol, t), evolve_scalar(th0, sol, t), SQUARE)
    assert j - j0 == pytest.approx(scalar_anomaly(rho0, th0, sol, SQUARE, t, integrate=False).lagrangian,
                                   abs=1e-8)
    one = EntropyPair.from_callable("one", lambda u: np.ones_like(np.asarray(u, float)),
                                    lambda u: np.zeros_like(np.asarray(u, float)))
    m = evolve_density(rho0, sol, t)
    assert scalar_invariant(m, evolve_scalar(th0, sol, t), one) == pytest.approx(m.initial_mass(), abs=1e-12)


def test_momentum_forms_on_tracked_shock(smooth):
    sol, rho0, _ = smooth
    for t in (1.5, 2.5):
        m = evolve_density(rho0, sol, t)
        assert m.total_mass() == pytest.approx(m.initial_mass(), abs=1e-12)
        for row in momentum_anomaly(m):
            assert row.anomaly == pytest.approx(row.flux_balance, abs=1e-4)
            assert row.mass_rate >= -1e-10


def test_weak_residuals(riemann):
    rho0 = Profile.from_function(lambda a: 1 + 0.3 * np.tanh(a), -5, 5)
    tests = bump_family(riemann, -2, 2, 0.2, 1.5)
    assert len(tests) == 20
    dens = weak_residual(riemann, rho0, 0.2, 1.5, tests)
    assert np.max(np.abs(dens.residual)) <= 1e-5
    prod = weak_residual(riemann, rho0, 0.2, 1.5, tests, theta0=Profile.from_function(np.sin, -5, 5))
    assert np.max(np.abs(prod.residual)) > 1e-3
    assert prod.max_error <= 1e-4


def test_exports(sawtooth):
    m = evolve_density(RHO_KH, sawtooth, 1.0)
    th = evolve_scalar(Profile.from_function(lambda a: a, -3, 3, deriv=np.ones_like), sawtooth, 1.0)
    rows = list(csv.reader(io.StringIO(transport_csv(m, th, np.array([-0.2, 0.0, 0.2])))))
    assert rows[0] == ["x", "rho_continuous", "theta", "flag"]
    assert [r[3] for r in rows[1:]] == ["regular", "shock", "regular"]
    atoms = json.loads(atom_table_json(m, th))
    assert atoms[0]["mass"] == pytest.approx(m.atoms[0].mass)


def test_rarefaction_fan_is_vacuum():
    sol = EntropySolution(InitialVelocity.riemann(-1, 1, allow_rarefaction=True))
    m = evolve_density(Profile.constant(1.0, -5, 5), sol, 1.0)
    rows = transport_table(m, None, np.array([-2.0, 0.0, 2.0]))
    assert [r[3] for r in rows] == ["regular", "vacuum", "regular"]
    assert rows[1][1] == 0.0
