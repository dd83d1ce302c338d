import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfsurrogate.channel import (
    ChannelDraw,
    ChannelRealization,
    FadingParams,
    apply,
    channel_gains,
    draw_channel,
    receive,
    receive_with_perturbation,
    sample_channel,
)
from rfsurrogate.iq import IqFrame, awgn, qpsk_frame


def fixed_draw(k=16):
    return ChannelDraw(np.zeros(1), np.ones((1, k), dtype=complex))


def test_gain_at_reference_distance():
    g = channel_gains(FadingParams(), 1.0, fixed_draw())
    assert np.all(g == 1 + 0j)


def test_gain_at_two():
    g = channel_gains(FadingParams(), 2.0, fixed_draw())
    assert np.allclose(np.abs(g), 0.5**2.7)
    assert abs(g[0, 0]) == pytest.approx(0.15389, abs=1e-5)


def test_gain_decreases_with_distance(rng):
    p = FadingParams()
    draw = draw_channel(p, 50, 16, rng)
    assert np.all(np.abs(channel_gains(p, 0.5, draw)) > np.abs(channel_gains(p, 1.5, draw)))


def test_rejects_bad_distance(rng):
    with pytest.raises(ValueError):
        sample_channel(FadingParams(), 0.0, 16, rng)
    with pytest.raises(ValueError):
        FadingParams().path_gain(-1.0)


def test_rayleigh_unit_power(rng):
    draw = draw_channel(FadingParams(), 20_000, 4, rng)
    assert np.mean(np.abs(draw.rayleigh) ** 2) == pytest.approx(1.0, abs=0.03)


@pytest.mark.parametrize("domain, factor", [("power", 20.0), ("amplitude", 10.0)])
def test_shadow_domain(domain, factor):
    p = FadingParams(shadow_domain=domain)
    assert p.shadow_gain(6.0) == pytest.approx(10 ** (6.0 / factor))


def test_shadow_power_spread(rng):
    # power-domain shadowing: 10 log10 of the received power factor has std 8 dB
    p = FadingParams()
    draw = draw_channel(p, 20_000, 1, rng)
    x = 20 * np.log10(p.shadow_gain(draw.shadow_db))
    assert np.std(x) == pytest.approx(8.0, rel=0.03)


def test_symbol_and_frame_coherence(rng):
    sym = draw_channel(FadingParams(), 3, 16, np.random.default_rng(0))
    frame = draw_channel(FadingParams(coherence="frame"), 3, 16, np.random.default_rng(0))
    assert len(np.unique(sym.rayleigh[0])) == 16
    assert np.all(frame.rayleigh == frame.rayleigh[:, :1])


def test_params_validation():
    with pytest.raises(ValueError):
        FadingParams(shadow_domain="bogus")
    with pytest.raises(ValueError):
        FadingParams(coherence="slot")
    with pytest.raises(ValueError):
        FadingParams(gamma=0.0)


def test_apply_identity_and_zero(rng):
    x = qpsk_frame(16, 1.0, rng)
    assert apply(ChannelRealization.identity(16), x) == x
    h = sample_channel(FadingParams(), 1.0, 16, rng)
    assert apply(h, IqFrame.zeros(16)) == IqFrame.zeros(16)


def test_apply_matches_real_arithmetic(rng):
    h = sample_channel(FadingParams(), 0.7, 16, rng)
    x = IqFrame(rng.standard_normal(16) + 1j * rng.standard_normal(16))
    out = apply(h, x).samples
    a, b = h.gains.real, h.gains.imag
    c, d = x.samples.real, x.samples.imag
    assert np.allclose(out.real, a * c - b * d, rtol=0, atol=1e-12)
    assert np.allclose(out.imag, a * d + b * c, rtol=0, atol=1e-12)


def test_apply_length_mismatch(rng):
    with pytest.raises(ValueError):
        apply(ChannelRealization.identity(8), qpsk_frame(16, 1.0, rng))


def test_receive_noiseless_identity(rng):
    x = qpsk_frame(16, 1.0, rng)
    assert receive(ChannelRealization.identity(16), x, 0.0, rng) == x


def test_receive_noise_power(rng):
    h = ChannelRealization.identity(16)
    p = np.mean([np.sum(np.abs(receive(h, IqFrame.zeros(16), 0.1, rng).samples) ** 2) for _ in range(4000)])
    assert p == pytest.approx(16 * 0.1, rel=0.03)


def test_receive_deterministic(rng):
    h = sample_channel(FadingParams(), 1.0, 16, rng)
    x = qpsk_frame(16, 1.0, rng)
    assert receive(h, x, 0.1, np.random.default_rng(5)) == receive(h, x, 0.1, np.random.default_rng(5))


def test_zero_perturbation_equals_receive(rng):
    h = sample_channel(FadingParams(), 1.0, 16, rng)
    g = sample_channel(FadingParams(), 0.5, 16, rng)
    x = qpsk_frame(16, 1.0, rng)
    a = receive(h, x, 0.1, np.random.default_rng(9))
    b = receive_with_perturbation(h, x, g, IqFrame.zeros(16), 0.1, np.random.default_rng(9))
    assert a == b


def test_perturbation_only(rng):
    g = sample_channel(FadingParams(), 0.5, 16, rng)
    d = IqFrame(rng.standard_normal(16) + 1j * rng.standard_normal(16))
    h = sample_channel(FadingParams(), 1.0, 16, rng)
    out = receive_with_perturbation(h, IqFrame.zeros(16), g, d, 0.0, rng)
    assert out == apply(g, d)


def test_perturbed_sum_of_parts(rng):
    h = sample_channel(FadingParams(), 1.0, 16, rng)
    g = sample_channel(FadingParams(), 0.5, 16, rng)
    x = qpsk_frame(16, 1.0, rng)
    d = IqFrame(rng.standard_normal(16) + 1j * rng.standard_normal(16))
    out = receive_with_perturbation(h, x, g, d, 0.1, np.random.default_rng(11))
    n = awgn(16, 0.1, np.random.default_rng(11))
    expect = h.gains * x.samples + g.gains * d.samples + n.samples
    assert np.allclose(out.samples, expect, rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0), st.integers(0, 2**31))
def test_gain_monotone_in_distance(d1, d2, seed):
    p = FadingParams()
    draw = draw_channel(p, 4, 16, np.random.default_rng(seed))
    near, far = sorted((d1, d2))
    assert np.all(np.abs(channel_gains(p, near, draw)) >= np.abs(channel_gains(p, far, draw)))
