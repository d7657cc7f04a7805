"""Exact rational helpers shared across the simulator.

Every quantity on a core path (ratings, perceptions, utilities, bounds) is a
``fractions.Fraction``.  Floats appear only at the rendering edge (figures).
Config values written as decimal strings parse losslessly: "0.8" becomes 4/5,
never the nearest binary float.
"""

from __future__ import annotations

from fractions import Fraction

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


def rat(value) -> Fraction:
    """Parse a config-level number into an exact rational.

    Accepts ints, Fractions, and strings in decimal ("0.8") or ratio
    ("4/5") form.  Binary floats are rejected: they silently corrupt the
    exact-arithmetic contract.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError(
            f"refusing float {value!r}: pass a decimal string for exactness"
        )
    raise TypeError(f"cannot interpret {value!r} as a rational")


def rat_str(value: Fraction) -> str:
    """Canonical compact form: '3' for integers, '14/19' otherwise."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def in_unit_interval(value: Fraction) -> bool:
    return ZERO <= value <= ONE


def discounted_ratio(
    iq: list[Fraction | int],
    it: list[int],
    delta: Fraction,
    anchor: Fraction,
) -> Fraction:
    """Weighted-average rating over a per-round history.

    ``iq[i]`` is the round-(i+1) quality datum (a bit for a single buyer's
    experience, a fraction of sales for market-wide data) and ``it[i]`` the
    matching sale indicator.  The weight for round i at horizon t is
    delta**(t-i-1), so the most recent round carries weight 1.  Rounds with
    no sale contribute nothing to either side of the ratio.  A history with
    no sales at all collapses to ``anchor``.

    Exponents are calendar-indexed: a no-sale round still shifts every older
    weight by one power of delta.
    """
    if len(iq) != len(it):
        raise ValueError("history columns differ in length")
    m = len(it)
    if not any(it):
        return anchor
    a, b = delta.numerator, delta.denominator
    # Integer accumulation over the common denominator b**(m-1); the common
    # factor cancels in the ratio, so only one gcd runs (in Fraction()).
    scale = 1
    for q in iq:
        d = q.denominator if isinstance(q, Fraction) else 1
        scale = scale // _gcd(scale, d) * d
    num = 0
    den = 0
    weight = b ** (m - 1) * scale  # round m gets delta**0
    for i in range(m - 1, -1, -1):
        if it[i]:
            q = iq[i]
            if isinstance(q, Fraction):
                num += weight // q.denominator * q.numerator
            else:
                num += weight * q
            den += weight
        if i > 0:
            weight = weight * a // b
    return Fraction(num, den)


def _gcd(x: int, y: int) -> int:
    while y:
        x, y = y, x % y
    return x
