import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sc3sim.channel import (
    ChannelProfile,
    ChannelRealization,
    LinkBudget,
    achievable_rate,
    apply_channel,
    link_snr,
    max_doppler,
    noise_power,
    pathloss_db,
    sample_channel,
)
from sc3sim.scene import Building, Scene


def _direct_filter(x, gains, delays, dops, fs):
    """Independent loop: y[n] = sum_p g_p exp(j2pi f_p n / fs) x[n - l_p]."""
    out = np.zeros(len(x) + max(delays), dtype=complex)
    for n in range(len(out)):
        for g, l, f in zip(gains, delays, dops):
            if 0 <= n - l < len(x):
                out[n] += g * np.exp(2j * np.pi * f * n / fs) * x[n - l]
    return out


@given(st.integers(0, 2**31 - 1))
def test_apply_channel_matches_direct_sum(seed):
    rng = np.random.default_rng(seed)
    fs = 1.0e6
    delays = sorted(rng.integers(0, 6, 3).tolist())
    gains = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    dops = rng.uniform(-2000, 2000, 3)
    h = ChannelRealization.from_arrays(gains, delays, dops, fs)
    x = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    ref = _direct_filter(x, [t.gain for t in h.taps], list(h.delay_samples), [t.doppler for t in h.taps], fs)
    assert np.allclose(apply_channel(x, h, noiseless=True), ref, atol=1e-12)


def test_noise_requires_rng_and_has_configured_variance():
    h = ChannelRealization.from_arrays([1.0], [0], [0.0], 1e6, noise_psd=2e-6)
    assert h.noise_var == pytest.approx(2.0)
    with pytest.raises(ValueError):
        apply_channel(np.zeros(4), h)
    y = apply_channel(np.zeros(200_000), h, np.random.default_rng(0))
    assert np.var(y) == pytest.approx(2.0, rel=0.02)


def test_delay_limit_enforced():
    h = ChannelRealization.from_arrays([1.0], [9], [0.0], 1e6)
    with pytest.raises(ValueError):
        apply_channel(np.ones(4), h, noiseless=True, max_delay_samples=8)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 40.0))
def test_sampled_taps_are_physical(seed, speed):
    rng = np.random.default_rng(seed)
    heading = rng.uniform(0, 2 * np.pi)
    vel = speed * np.array([np.cos(heading), np.sin(heading), 0.0])
    h = sample_channel((0, 0, 100), vel, (300, 50, 0), None, LinkBudget(), rng)
    delays = [t.delay for t in h.taps]
    assert delays[0] == 0.0 and delays == sorted(delays)
    assert max(delays) <= ChannelProfile().max_delay
    assert np.linalg.norm(h.gains) == pytest.approx(1.0)
    assert np.all(np.abs(h.dopplers) <= max_doppler(speed, 5.8e9) + 1e-9)


def test_los_doppler_is_velocity_projection():
    rng = np.random.default_rng(1)
    prof = ChannelProfile(n_nlos=0)
    h = sample_channel((0, 0, 0), (40, 0, 0), (1000, 0, 0), None, LinkBudget(), rng, profile=prof)
    assert h.taps[0].doppler == pytest.approx(40 * 5.8e9 / 3e8)


def test_blocked_link_has_no_los_tap():
    wall = Scene((100.0, 100.0), (Building((50.0, 0.0), 4.0, 40.0, 50.0),))
    rng = np.random.default_rng(0)
    h = sample_channel((0, 0, 10), (0, 0, 0), (100, 0, 0), wall, LinkBudget(), rng)
    assert len(h.taps) == ChannelProfile().n_nlos


def test_speed_cap():
    with pytest.raises(ValueError):
        sample_channel((0, 0, 10), (41, 0, 0), (10, 0, 0), None, LinkBudget(), np.random.default_rng(0))


def test_link_budget_numbers():
    assert max_doppler(40.0, 5.8e9) == pytest.approx(773.3333333333)
    assert pathloss_db(100.0, True, 5.8e9) == pytest.approx(87.7111, abs=1e-3)
    assert pathloss_db(100.0, False, 5.8e9) - pathloss_db(100.0, True, 5.8e9) == pytest.approx(30.0)
    assert 10 * np.log10(noise_power(1.0, 0.0) * 1e3) == pytest.approx(-173.98, abs=0.01)
    assert achievable_rate(3.0, 1e6) == pytest.approx(2e6)
    snr = link_snr(LinkBudget(), 100.0, True, 1e6)
    assert 10 * np.log10(snr) == pytest.approx(30 - 87.7111 + 173.98 - 60 - 7, abs=0.02)
    with pytest.raises(ValueError):
        pathloss_db(0.0, True, 5.8e9)
    with pytest.raises(ValueError):
        achievable_rate(-1.0, 1e6)


@given(st.integers(0, 2**31 - 1))
def test_noiseless_channel_is_linear_and_unit_tap_keeps_energy(seed):
    rng = np.random.default_rng(seed)
    h = ChannelRealization.from_arrays(rng.standard_normal(3) + 1j * rng.standard_normal(3), [0, 2, 5], rng.uniform(-800, 800, 3), 15.36e6)
    x1, x2 = rng.standard_normal((2, 64)) + 1j * rng.standard_normal((2, 64))
    al, be = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
    lhs = apply_channel(al * x1 + be * x2, h, noiseless=True)
    rhs = al * apply_channel(x1, h, noiseless=True) + be * apply_channel(x2, h, noiseless=True)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10
    unit = ChannelRealization.from_arrays([np.exp(1j * rng.uniform(0, 6.28))], [int(rng.integers(0, 4))], [rng.uniform(-800, 800)], 15.36e6)
    y = apply_channel(x1, unit, noiseless=True)
    assert abs(np.vdot(y, y).real - np.vdot(x1, x1).real) <= 1e-10 * np.vdot(x1, x1).real


def test_same_seed_same_realization_and_noise():
    def draw(seed):
        rng = np.random.default_rng(seed)
        h = sample_channel(np.array([0.0, 0.0, 100.0]), np.array([40.0, 0.0, 0.0]), np.array([300.0, 0.0, 0.0]), None,
                           LinkBudget(), rng, sample_rate=15.36e6, noise_psd=1e-9)
        return h, apply_channel(np.ones(32, complex), h, rng)
    (h1, y1), (h2, y2) = draw(5), draw(5)
    assert h1 == h2 and np.array_equal(y1, y2)
