import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdlink.canceller import CancellationMode
from fdlink.metrics import (
    InfiniteSinrWarning,
    LinkMetrics,
    achievable_rate,
    bit_error_rate,
    sinr,
    sinr_gain,
    sinr_gain_db,
    to_db,
)


def test_sinr_example():
    assert sinr(1e-9, 1e-10) == pytest.approx(10.0)


def test_zero_residual_warns():
    with pytest.warns(InfiniteSinrWarning):
        assert sinr(1.0, 0.0) == math.inf


def test_negative_power():
    with pytest.raises(ValueError):
        sinr(-1.0, 1.0)


def test_gain_examples():
    assert sinr_gain(10.0, 1.0) == 10.0
    assert sinr_gain_db(100.0, 1.0) == pytest.approx(20.0)
    assert sinr_gain_db(3.0, 3.0) == 0.0
    with pytest.raises(ValueError):
        sinr_gain(0.0, 1.0)


def test_rate_examples():
    assert achievable_rate(0.0) == 0.0
    assert achievable_rate(1.0) == 1.0
    assert achievable_rate(3.0) == 2.0
    assert achievable_rate(math.inf) == math.inf
    with pytest.raises(ValueError):
        achievable_rate(-0.5)


def test_ber():
    assert bit_error_rate([0, 1, 1, 0], [0, 1, 0, 1]) == 0.5
    assert bit_error_rate(np.zeros(10), np.zeros(10)) == 0.0
    with pytest.raises(ValueError):
        bit_error_rate([0, 1], [0])
    with pytest.raises(ValueError):
        bit_error_rate([], [])


def test_to_db():
    assert to_db(100.0) == pytest.approx(20.0)
    assert to_db(0.0) == -math.inf


@given(g=st.floats(0, 1e12))
def test_rate_monotone_and_inverse(g):
    r = achievable_rate(g)
    assert r >= 0
    assert achievable_rate(g * 1.5 + 1e-9) > r
    assert 2.0**r - 1.0 == pytest.approx(g, rel=1e-9, abs=1e-12)


@given(a=st.floats(1e-6, 1e6), b=st.floats(1e-6, 1e6))
def test_gain_antisymmetric(a, b):
    assert sinr_gain_db(a, b) == pytest.approx(-sinr_gain_db(b, a), abs=1e-9)


@given(n=st.integers(1, 200), seed=st.integers(0, 1000))
def test_ber_counts(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, n)
    flips = rng.integers(0, 2, n)
    assert bit_error_rate(a, a ^ flips) * n == pytest.approx(flips.sum())


class TestLinkMetrics:
    def test_from_tallies(self):
        m = LinkMetrics.from_tallies(3.0, 1.0, 5, 1000, 10.0, CancellationMode.PS_B, 7)
        assert m.sinr_linear == 3.0
        assert m.rate_bps_hz == 2.0
        assert m.ber == 0.005
        assert m.sinr_db == pytest.approx(4.7712125472)
        assert not m.saturated

    def test_mode_from_string(self):
        m = LinkMetrics(1.0, 1.0, 0.0, 0.0, "PS", 10, 0)
        assert m.mode is CancellationMode.PS

    def test_inconsistent_rate(self):
        with pytest.raises(ValueError, match="inconsistent"):
            LinkMetrics(1.0, 1.1, 0.0, 0.0, "PS", 10, 0)

    def test_ber_range(self):
        with pytest.raises(ValueError):
            LinkMetrics(1.0, 1.0, 1.5, 0.0, "PS", 10, 0)

    def test_saturated(self):
        with pytest.warns(InfiniteSinrWarning):
            m = LinkMetrics.from_tallies(1.0, 0.0, 0, 10, 0.0, "PS+B", 0)
        assert m.saturated and m.rate_bps_hz == math.inf

    @given(g=st.floats(0, 1e9))
    def test_rate_coupling(self, g):
        m = LinkMetrics(g, achievable_rate(g), 0.0, 0.0, "PS", 1, 0)
        assert m.rate_bps_hz == pytest.approx(math.log2(1 + m.sinr_linear), abs=1e-12)
