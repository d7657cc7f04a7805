"""Exact rational helpers."""

from fractions import Fraction as F

import pytest

from b2bmarket.numeric import discounted_ratio, rat, rat_str


def test_rat_parses_decimal_strings_exactly():
    assert rat("0.8") == F(4, 5)
    assert rat("0.1") == F(1, 10)  # not the nearest binary float
    assert rat("4/5") == F(4, 5)
    assert rat(3) == F(3)


def test_rat_refuses_floats():
    with pytest.raises(TypeError, match="decimal string"):
        rat(0.1)


def test_rat_str_forms():
    assert rat_str(F(3)) == "3"
    assert rat_str(F(14, 19)) == "14/19"


def test_discounted_ratio_empty_history_is_anchor():
    assert discounted_ratio([], [], F(4, 5), F(1, 2)) == F(1, 2)
    assert discounted_ratio([0, 0], [0, 0], F(4, 5), F(1, 3)) == F(1, 3)


def test_discounted_ratio_recent_rounds_weigh_more():
    # High then low vs low then high: recency must dominate.
    newer_high = discounted_ratio([0, 1], [1, 1], F(4, 5), F(1, 2))
    older_high = discounted_ratio([1, 0], [1, 1], F(4, 5), F(1, 2))
    assert newer_high > F(1, 2) > older_high
    assert newer_high + older_high == 1


def test_discounted_ratio_mixed_denominators():
    got = discounted_ratio([F(1, 3), F(1, 2)], [1, 1], F(9, 10), F(1, 2))
    expected = (F(9, 10) * F(1, 3) + F(1, 2)) / (F(9, 10) + 1)
    assert got == expected


def test_discounted_ratio_rejects_ragged_columns():
    with pytest.raises(ValueError):
        discounted_ratio([1], [1, 0], F(4, 5), F(1, 2))
