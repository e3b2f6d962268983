import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from burgerslab.errors import ConfigInvalid
from burgerslab.initial import InitialVelocity


def _fd(f, a, h=1e-5):
    return (f(a + h) - f(a - h)) / (2 * h)


@pytest.mark.parametrize("u0", [
    InitialVelocity.riemann(1.0, -1.0),
    InitialVelocity.linear_ramp(-1.0, 2.0),
    InitialVelocity.sawtooth(1.0, 0.5),
    InitialVelocity.from_function(np.sin, -4, 4, 401),
])
def test_potential_is_antiderivative(u0):
    a = np.array([-1.7, -0.3, 0.4, 1.3])
    assert np.allclose(_fd(u0.potential, a), u0.velocity(a), atol=1e-6)


def test_rejects_bad_data():
    with pytest.raises(ConfigInvalid):
        InitialVelocity.riemann(-1.0, 1.0)
    with pytest.raises(ConfigInvalid):
        InitialVelocity.smooth_sampled([0.0, 2.0, 1.0, 3.0], [0, 0, 0, 0])
    with pytest.raises(ConfigInvalid):
        InitialVelocity("nope", {})
    with pytest.raises(ConfigInvalid):
        InitialVelocity.from_dict({"parameters": {}})
    assert InitialVelocity.riemann(-1.0, 1.0, allow_rarefaction=True).kind == "riemann"


def test_dict_round_trip():
    for u0 in (InitialVelocity.riemann(2.0, 0.5), InitialVelocity.from_function(np.cos, -2, 2, 11)):
        back = InitialVelocity.from_dict(u0.to_dict())
        a = np.linspace(-1.5, 1.5, 7)
        assert back.kind == u0.kind
        assert np.array_equal(back.velocity(a), u0.velocity(a))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 3))
def test_riemann_one_sided_values(um, gap):
    u0 = InitialVelocity.riemann(um, um - gap)
    assert u0.velocity(0.0, -1) == um
    assert u0.velocity(0.0, 1) == um - gap
