import numpy as np
import pytest
from scipy.stats import kstest

from burgerslab.backward_flow import (atom_mass, branch_densities, jump_rates, limiting_two_state,
                                      sample_paths, shock_velocity_representation,
                                      verify_martingale)
from burgerslab.errors import OutOfSupport, T0TooLate


def test_riemann_law(riemann):
    law = branch_densities(riemann, 0, 0.0, 2.0)
    tau = np.array([0.1, 0.7, 1.9])
    assert np.allclose(law.p_plus(tau), 0.25)
    assert np.allclose(law.p_minus(tau), 0.25)
    assert law.normalization() == pytest.approx(1.0, abs=1e-9)
    lp, lm = jump_rates(law, 0.5)
    assert (lp, lm) == pytest.approx((1.0, 1.0))
    assert jump_rates(law, 2.0) == pytest.approx((0.25, 0.25))
    assert atom_mass(law, 0.5) == pytest.approx(0.25)
    assert atom_mass(law, 2.0) == pytest.approx(1.0)
    with pytest.raises(OutOfSupport):
        jump_rates(law, 2.5)


def test_rates_blow_up_at_formation(ramp):
    law = branch_densities(ramp, 0, 0.3, 3.0)
    assert atom_mass(law, 0.9) == 0.0
    assert law.normalization() == pytest.approx(1.0, abs=1e-9)
    rates = [sum(jump_rates(law, 1.0 + d)) for d in (1e-1, 1e-3, 1e-6)]
    assert rates[0] < rates[1] < rates[2]


def test_sawtooth_density_and_sampling(sawtooth):
    law = branch_densities(sawtooth, 0, 0.5, 2.0)
    # oracle: P(tau <= x) = (1 - 0.5/x) / (1 - 0.5/2)
    tau = np.array([0.7, 1.2, 1.9])
    assert np.allclose(law.p_plus(tau) + law.p_minus(tau), 0.5 / (tau ** 2 * 0.75), rtol=1e-10)
    assert law.normalization() == pytest.approx(1.0, abs=1e-9)
    ens = sample_paths(law, 20_000, 3)
    d = kstest(ens.tau, lambda x: (1 - 0.5 / x) / 0.75).statistic
    assert d < 1.63 / np.sqrt(20_000)
    assert np.max(np.abs(ens.position(2.0) - ens.x_f)) <= 1e-12


def test_t0_after_formation_is_rejected(ramp):
    with pytest.raises(T0TooLate):
        branch_densities(ramp, 0, 1.2, 3.0)


def test_symmetric_sides_and_martingale(riemann):
    n = 40_000
    ens = sample_paths(branch_densities(riemann, 0, 0.0, 2.0), n, 7)
    assert abs(np.mean(ens.side > 0) - 0.5) <= 3 * 0.5 / np.sqrt(n)
    rep = verify_martingale(ens, [0.2, 0.6, 1.0, 1.4, 1.8], conditioning=1.5)
    assert rep.passed
    assert any(r["bin"] == "atom:0" for r in rep.rows)


def test_seed_streams_are_order_independent(riemann):
    law = branch_densities(riemann, 0, 0.0, 2.0)
    full = sample_paths(law, 1000, 5)
    tail = sample_paths(law, 400, 5, start=600)
    assert np.array_equal(full.tau[600:], tail.tau)


def test_non_uniqueness_witness(ramp):
    a = branch_densities(ramp, 0, 0.0, 3.0)
    b = branch_densities(ramp, 0, 0.6, 3.0)
    tau = np.linspace(1.05, 2.9, 50)
    assert np.max(np.abs(a.p_plus(tau) - b.p_plus(tau))) > 1e-3
    for law, seed in ((a, 1), (b, 2)):
        ens = sample_paths(law, 30_000, seed)
        assert verify_martingale(ens, [0.5, 1.2, 2.0, 2.6], conditioning=2.8).passed


def test_merger_tree(twodip):
    law = branch_densities(twodip, 2, 0.0, 2.5)
    assert law.normalization() == pytest.approx(1.0, abs=1e-9)
    assert sum(law.merger_probs[2].values()) == pytest.approx(1.0)
    assert max(law.merger_consistency().values()) <= 1e-8
    n = 30_000
    freq = sample_paths(law, n, 11).merger_frequencies()[2]
    for c, b in law.merger_probs[2].items():
        assert abs(freq[c] - b) <= 3 * np.sqrt(b * (1 - b) / n)


def test_two_state_comparator(riemann, sawtooth):
    ens = limiting_two_state(sawtooth, 0, 2.0, 20_000, 4)
    assert verify_martingale(ens, [0.6, 1.0, 1.5]).passed
    rep = shock_velocity_representation(sawtooth, 0, 2.0)
    vals = list(rep.values())
    assert max(vals) - min(vals) <= 1e-10
