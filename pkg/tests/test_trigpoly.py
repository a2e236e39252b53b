import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resolimit.trigpoly import TrigPolynomial, torus_distance, wrap


def test_rejects_even_length():
    with pytest.raises(ValueError):
        TrigPolynomial(np.ones(4))


def test_eval_and_derivatives_match_direct_sum(rng):
    c = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    Q = TrigPolynomial(c)
    t = rng.uniform(-0.5, 0.5, 9)
    k = np.arange(-3, 4)
    for ell in range(3):
        direct = np.array([np.sum((2j * np.pi * k) ** ell * c * np.exp(2j * np.pi * k * x)) for x in t])
        np.testing.assert_allclose(Q.deriv(ell, t), direct, rtol=1e-12)


def test_on_grid_matches_pointwise(rng):
    c = rng.standard_normal(11) + 1j * rng.standard_normal(11)
    Q = TrigPolynomial(c)
    t, v = Q.on_grid(64, ell=1)
    np.testing.assert_allclose(v, Q.deriv(1, t), atol=1e-10)
    assert t[0] == -0.5


def test_hermitian_polynomial_is_real(rng):
    half = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    c = np.concatenate([np.conj(half[::-1]), [1.3], half])
    Q = TrigPolynomial(c)
    assert Q.is_hermitian()
    assert np.max(np.abs(Q(np.linspace(-0.5, 0.5, 50)).imag)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(t0=st.floats(-2, 2), t=st.floats(-2, 2))
def test_shift_and_reflection(t0, t):
    Q = TrigPolynomial(np.array([0.3, 1 - 1j, 2.0, 0.5j, -1.0]))
    assert Q.shifted(t0)(t) == pytest.approx(Q(t - t0), abs=1e-10)
    assert Q.reflected()(t) == pytest.approx(Q(-t), abs=1e-10)


def test_wrap_and_distance():
    assert wrap(0.5) == -0.5
    assert wrap(-0.75) == pytest.approx(0.25)
    assert torus_distance(0.45, -0.45) == pytest.approx(0.1)
