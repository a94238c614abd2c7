"""Fixed-point acceptance tables.

The frozen threshold constants below were computed once with 50-digit
arithmetic (mpmath): floor(2^32 * exp(-beta * dE)).  They pin the table
builder to the exact integers the update rule must compare against.
"""

from fractions import Fraction

import math

import numpy as np
import pytest

from eamc import build_acceptance_table, build_heatbath_table
from eamc.acceptance import TWO32

# (beta, dE) -> floor(2^32 * exp(-beta * dE)), frozen
FROZEN = {
    (0.5, 4): 581260615,
    (0.6, 4): 389630642,
    (0.6, 8): 35346494,
    (0.6, 12): 3206561,
    (1.0, 4): 78665070,
    (1.0, 8): 1440801,
    (1.0, 12): 26389,
}


def test_frozen_thresholds():
    for (beta, de), want in FROZEN.items():
        t = build_acceptance_table(beta)
        key = (de + 12) // 4  # n_sat for this dE
        assert int(t.thresholds[key]) == want, (beta, de)
        assert t.always[key] == 0


def test_zero_field_table_layout():
    t = build_acceptance_table(0.7)
    assert t.n_keys == 7
    assert list(t.delta_e) == [4.0 * n - 12.0 for n in range(7)]
    # dE <= 0 always accepts, marked by flag and full-range threshold
    assert list(t.always) == [1, 1, 1, 1, 0, 0, 0]
    assert all(int(t.thresholds[k]) == TWO32 for k in range(4))
    # thresholds strictly decrease as dE grows
    assert int(t.thresholds[4]) > int(t.thresholds[5]) > int(t.thresholds[6]) > 0
    assert t.key_of(3) == 3


def test_beta_zero_accepts_everything():
    t = build_acceptance_table(0.0)
    # exp(0) = 1: threshold 2^32 can never lose a strict compare with u32
    assert all(int(x) == TWO32 for x in t.thresholds)


def test_large_beta_threshold_zero_never_accepts():
    # beta=30, dE=4: 2^32 * e^-120 rounds to 0; strict compare never passes
    t = build_acceptance_table(30.0)
    assert int(t.thresholds[4]) == 0
    assert all(int(t.thresholds[k]) == 0 for k in (4, 5, 6))


def test_negative_beta_rejected():
    with pytest.raises(ValueError):
        build_acceptance_table(-0.1)
    with pytest.raises(ValueError):
        build_heatbath_table(-1.0)


def test_field_table_layout():
    h = Fraction(1, 4)
    t = build_acceptance_table(0.8, h)
    assert t.n_keys == 14
    for n_sat in range(7):
        base = 4 * n_sat - 12
        # align bit a = field_bit XOR spin_bit; a=0 means field fights the flip
        assert t.delta_e_exact[t.key_of(n_sat, 0)] == base + 2 * h
        assert t.delta_e_exact[t.key_of(n_sat, 1)] == base - 2 * h
    # always flags track the exact sign of dE
    for k, de in enumerate(t.delta_e_exact):
        assert t.always[k] == (1 if de <= 0 else 0)
        if de > 0:
            want = math.floor(TWO32 * math.exp(-0.8 * float(de)))
            assert int(t.thresholds[k]) == want


def test_field_quantization_enforced():
    with pytest.raises(ValueError):
        build_acceptance_table(1.0, Fraction(1, 3))
    with pytest.raises(ValueError):
        build_heatbath_table(1.0, 0.2)


def test_heatbath_zero_field_table():
    t = build_heatbath_table(0.45)
    assert len(t.thresholds) == 7  # m in {-6, -4, ..., 6}
    # m = 0 (key 3): p = 1/2 exactly -> threshold 2^31
    assert int(t.thresholds[3]) == TWO32 // 2
    vals = [int(x) for x in t.thresholds]
    assert all(a < b for a, b in zip(vals, vals[1:]))  # monotone in m
    # symmetry: p(m) + p(-m) = 1, so thresholds mirror around 2^31
    for k in range(1, 4):
        assert abs(vals[3 - k] + vals[3 + k] - TWO32) <= 1  # floor rounding
    # m = +6 at this beta: p close to 1 but threshold stays < 2^32
    assert vals[-1] < TWO32


def test_heatbath_key_count_with_field():
    t = build_heatbath_table(0.45, Fraction(1, 2))
    assert len(t.thresholds) == 14


def test_heatbath_saturates_at_full_range():
    # huge beta: p(m=6) rounds to 1.0 in binary64, threshold hits 2^32
    t = build_heatbath_table(50.0)
    assert int(t.thresholds[-1]) == TWO32
    assert int(t.thresholds[0]) == 0  # and p(m=-6) rounds to 0
