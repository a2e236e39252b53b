import math

import numpy as np
import pytest

import resolimit as rl
from resolimit.measure import (
    Observation,
    SpikeMeasure,
    add_noise,
    adjoint,
    forward,
    load_measure,
    save_measure,
)


def _random_measure(rng, S):
    t = rng.uniform(-0.5, 0.5, S)
    c = rng.standard_normal(S) + 1j * rng.standard_normal(S)
    return SpikeMeasure(t, c)


def test_measure_invariants():
    m = SpikeMeasure([0.75, 0.1], [1.0, 2j])
    assert m.t[0] == pytest.approx(-0.25)
    assert m.S == 2 and m.tv_norm == pytest.approx(3.0)
    assert m.min_separation() == pytest.approx(0.35)
    with pytest.raises(ValueError, match="nonzero"):
        SpikeMeasure([0.0, 0.1], [1.0, 0.0])
    with pytest.raises(ValueError, match="distinct"):
        SpikeMeasure([0.25, -0.75], [1.0, 1.0])
    assert SpikeMeasure.empty().S == 0


def test_measure_json_roundtrip(tmp_path, rng):
    m = _random_measure(rng, 3)
    save_measure(m, tmp_path / "m.json")
    back = load_measure(tmp_path / "m.json")
    np.testing.assert_array_equal(back.t, m.t)
    np.testing.assert_array_equal(back.c, m.c)
    with pytest.raises(ValueError, match="'re'"):
        SpikeMeasure.from_dict({"spikes": [{"t": 0.1}]})
    with pytest.raises(ValueError, match="'spikes'"):
        SpikeMeasure.from_dict({"atoms": []})


def test_forward_single_spike_is_gain(triangular):
    g = rl.sample_gain(triangular, 21)
    np.testing.assert_allclose(forward(SpikeMeasure([0.0], [1.0]), g), g.values, atol=1e-15)


def test_forward_opposite_spikes_cancel_dc(ideal):
    g = rl.sample_gain(ideal, 31)
    x = forward(SpikeMeasure([-0.02, 0.02], [1.0, -1.0]), g)
    assert abs(x[g.n]) < 1e-15


def test_forward_direct_sum(triangular, rng):
    # independent oracle: loop over spikes and frequencies
    g = rl.sample_gain(triangular, 15)
    m = _random_measure(rng, 3)
    ref = np.array([g.values[i] * sum(c * np.exp(-2j * np.pi * k * t) for t, c in zip(m.t, m.c))
                    for i, k in enumerate(g.k)])
    np.testing.assert_allclose(forward(m, g), ref, rtol=1e-12, atol=1e-12)


def test_forward_linearity(triangular, rng):
    g = rl.sample_gain(triangular, 41)
    for _ in range(5):
        m1, m2 = _random_measure(rng, 3), _random_measure(rng, 2)
        both = SpikeMeasure(np.concatenate([m1.t, m2.t]), np.concatenate([m1.c, m2.c]))
        np.testing.assert_allclose(forward(both, g), forward(m1, g) + forward(m2, g), atol=1e-12)


def test_adjoint_identity(triangular, rng):
    g = rl.sample_gain(triangular, 51)
    for _ in range(10):
        m = _random_measure(rng, 4)
        p = rng.standard_normal(51) + 1j * rng.standard_normal(51)
        lhs = float(np.vdot(forward(m, g), p).real)
        Q = adjoint(p, g)
        rhs = float(np.sum(np.conj(m.c) * Q(m.t)).real)
        assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(lhs)))


def test_adjoint_examples(ideal, rng):
    g = rl.sample_gain(ideal, 11)
    assert np.all(adjoint(np.zeros(11), g).coef == 0)
    p = rng.standard_normal(11) + 1j * rng.standard_normal(11)
    np.testing.assert_allclose(adjoint(p, g).coef, p)
    with pytest.raises(ValueError):
        adjoint(np.zeros(10), g)


def test_noise_infinite_snr(ideal):
    g = rl.sample_gain(ideal, 11)
    x = forward(SpikeMeasure([0.1], [1.0]), g)
    obs = add_noise(x, math.inf, 0, g)
    np.testing.assert_array_equal(obs.z, x)
    assert obs.eta == 0


def test_noise_power_matches_snr():
    N = 101
    x = np.ones(N, dtype=complex) / math.sqrt(N)
    rng = np.random.default_rng(5)
    power = [np.linalg.norm(add_noise(x, 60.0, rng).w) ** 2 for _ in range(4000)]
    # mean of 4000 draws of a scaled chi-square with 2N dof: sd ~ 1e-6 / sqrt(N * 4000)
    assert np.mean(power) == pytest.approx(1e-6, rel=0.01)


def test_noise_seed_determinism(ideal):
    g = rl.sample_gain(ideal, 21)
    x = forward(SpikeMeasure([0.1], [1.0]), g)
    a, b = add_noise(x, 30, 7, g), add_noise(x, 30, 7, g)
    assert a.w.tobytes() == b.w.tobytes()
    c = add_noise(x, 30, np.random.SeedSequence(7), g)
    assert np.array_equal(a.w, c.w)
    assert not np.array_equal(a.w, add_noise(x, 30, 8, g).w)


def test_noise_rejects_zero_signal():
    with pytest.raises(ValueError, match="undefined"):
        add_noise(np.zeros(5), 20.0, 0)
    with pytest.raises(ValueError):
        add_noise(np.ones(5), math.nan, 0)


def test_observation_consistency(ideal):
    g = rl.sample_gain(ideal, 11)
    obs = add_noise(np.ones(11), 20.0, 1, g)
    np.testing.assert_array_equal(obs.z, obs.x + obs.w)
    assert obs.eta == pytest.approx(np.linalg.norm(obs.w))
    with pytest.raises(ValueError):
        Observation(np.zeros(10), g)
