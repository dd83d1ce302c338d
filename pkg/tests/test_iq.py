import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfsurrogate.iq import (
    IqFrame,
    Label,
    awgn,
    complex_from_real,
    db,
    frame_power,
    from_db,
    from_real,
    qpsk_frame,
    qpsk_symbols,
    to_real,
)


def test_label_indices():
    assert int(Label.SIGNAL) == 0
    assert int(Label.NOISE) == 1


def test_qpsk_unit_energy(rng):
    f = qpsk_frame(16, 1.0, rng)
    assert len(f) == 16
    assert np.all(np.abs(f.samples) ** 2 == pytest.approx(1.0, abs=1e-15))


def test_qpsk_deterministic():
    a = qpsk_frame(16, 1.0, np.random.default_rng(7))
    b = qpsk_frame(16, 1.0, np.random.default_rng(7))
    assert a == b


def test_qpsk_mean_near_zero(rng):
    s = qpsk_symbols(100_000, 1.0, rng)
    # per-component std of a +-1/sqrt(2) draw is 1/sqrt(2)
    sigma = (1 / math.sqrt(2)) / math.sqrt(s.size)
    assert abs(s.real.mean()) < 3 * sigma
    assert abs(s.imag.mean()) < 3 * sigma


def test_qpsk_energy_scales(rng):
    s = qpsk_symbols(64, 4.0, rng)
    assert np.allclose(np.abs(s) ** 2, 4.0)


def test_qpsk_rejects_bad_args(rng):
    with pytest.raises(ValueError):
        qpsk_frame(0, 1.0, rng)
    with pytest.raises(ValueError):
        qpsk_frame(16, 0.0, rng)


def test_awgn_zero_power(rng):
    assert awgn(16, 0.0, rng) == IqFrame.zeros(16)


def test_awgn_deterministic():
    assert awgn(16, 0.5, np.random.default_rng(3)) == awgn(16, 0.5, np.random.default_rng(3))


def test_awgn_power(rng):
    n = awgn(100_000, 1.0, rng)
    p = np.mean(np.abs(n.samples) ** 2)
    assert 0.98 <= p <= 1.02


def test_awgn_rejects_negative_power(rng):
    with pytest.raises(ValueError):
        awgn(16, -1.0, rng)


def test_frame_power_examples():
    assert frame_power(IqFrame.zeros(16)) == 0.0
    assert frame_power(IqFrame(np.ones(16))) == 16.0


def test_frame_power_matches_real_sum(rng):
    f = IqFrame(rng.standard_normal(16) + 1j * rng.standard_normal(16))
    m = to_real(f)
    brute = 0.0
    for r in range(2):
        for c in range(16):
            brute += m[r, c] * m[r, c]
    assert frame_power(f) == pytest.approx(brute, rel=1e-14)


def test_db_examples():
    assert db(1) == 0.0
    assert db(10) == pytest.approx(10.0)
    assert from_db(3.0) == pytest.approx(10**0.3, rel=1e-15)
    assert from_db(3.0) == pytest.approx(1.99526, abs=1e-5)
    with pytest.raises(ValueError):
        db(0)


def test_to_real_layout():
    m = to_real(IqFrame(np.full(16, 1 + 2j)))
    assert m.shape == (2, 16)
    assert np.all(m[0] == 1) and np.all(m[1] == 2)
    assert not to_real(IqFrame.zeros(16)).any()


def test_from_real_rejects_bad_shape():
    with pytest.raises(ValueError):
        from_real(np.zeros((3, 16)))


def test_frame_is_immutable(rng):
    f = qpsk_frame(16, 1.0, rng)
    with pytest.raises(ValueError):
        f.samples[0] = 0


def test_frame_rejects_nonfinite():
    with pytest.raises(ValueError):
        IqFrame(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        IqFrame(np.array([]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e6), min_size=1, max_size=32))
def test_real_round_trip(values):
    f = IqFrame(np.array(values))
    assert from_real(to_real(f)) == f
    assert np.array_equal(complex_from_real(to_real(f.samples)), f.samples)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-100, max_value=100))
def test_db_inverse(x):
    assert db(from_db(x)) == pytest.approx(x, abs=1e-9)
