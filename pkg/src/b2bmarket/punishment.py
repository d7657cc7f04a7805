"""Buyer-side punishment of sellers.

Local policies blacklist per (buyer, seller) pair after a low-quality
delivery: forever (grim trigger), for exactly one round (tit for tat), or
for a fixed number of rounds (limited).  The threshold policy punishes
market-wide instead: a seller whose public rating drops below a threshold is
isolated from every buyer for a fixed number of rounds and rejoins with the
threshold value as his rating.  All buyers share one policy.

Feedback in the round that triggers punishment is still honest (the buyer
reports the low quality she received); the blacklist takes effect from the
following round.  Punishment applies only when the buyer's perceived quality
was positive, so a seller nobody expected anything of is not blacklisted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .pricing import BinaryAdaptive, BinaryNonAdaptive, Homogeneous, PricingRule


class PunishmentError(Exception):
    pass


@dataclass(frozen=True)
class GrimTrigger:
    kind = "grim"


@dataclass(frozen=True)
class TitForTat:
    kind = "tit_for_tat"


@dataclass(frozen=True)
class Limited:
    alpha: int

    kind = "limited"

    def __post_init__(self):
        if self.alpha < 1:
            raise PunishmentError("limited punishment needs alpha >= 1")


@dataclass(frozen=True)
class Threshold:
    threshold: Fraction
    alpha: int

    kind = "threshold"

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise PunishmentError("threshold must sit in (0, 1)")
        if self.alpha < 1:
            raise PunishmentError("isolation needs alpha >= 1")


PunishmentPolicy = GrimTrigger | TitForTat | Limited | Threshold

PERMANENT = -1  # sentinel expiry for grim-trigger entries


@dataclass
class BlacklistState:
    """Blacklist clocks: local per-pair entries and market-wide isolation.

    ``local[(buyer, seller)]`` holds the last round the pair is blocked
    (PERMANENT for grim trigger).  ``isolated[seller]`` holds
    (last blocked round, rating to restore on return).
    """

    local: dict[tuple[int, int], int] = field(default_factory=dict)
    isolated: dict[int, tuple[int, Fraction]] = field(default_factory=dict)

    def is_blacklisted(self, buyer: int, seller: int, t: int) -> bool:
        until = self.local.get((buyer, seller))
        if until is None:
            return False
        if until == PERMANENT:
            return True
        if t > until:
            del self.local[(buyer, seller)]
            return False
        return True

    def is_isolated(self, seller: int, t: int) -> bool:
        entry = self.isolated.get(seller)
        return entry is not None and t <= entry[0]

    def pop_expired_isolation(self, seller: int, t: int) -> Fraction | None:
        """Rating reset owed to a seller whose isolation ended before round t."""
        entry = self.isolated.get(seller)
        if entry is not None and t > entry[0]:
            del self.isolated[seller]
            return entry[1]
        return None


def apply_feedback(
    policy: PunishmentPolicy,
    buyer: int,
    seller: int,
    quality: str,
    perceived: Fraction,
    state: BlacklistState,
    t: int,
) -> BlacklistState:
    """Update the blacklist after buyer's round-t purchase.

    High quality never changes anything.  Low quality blacklists the seller
    starting next round, provided the buyer's perception of him this round
    was positive.  The threshold policy makes no local change; its punishment
    flows through the public rating instead.
    """
    if quality == "High":
        return state
    if quality != "Low":
        raise PunishmentError(f"quality must be High or Low, got {quality!r}")
    if perceived <= 0 or isinstance(policy, Threshold):
        return state
    if isinstance(policy, GrimTrigger):
        state.local[(buyer, seller)] = PERMANENT
    elif isinstance(policy, TitForTat):
        state.local[(buyer, seller)] = t + 1
    elif isinstance(policy, Limited):
        state.local[(buyer, seller)] = t + policy.alpha
    else:
        raise PunishmentError(f"unknown policy {policy!r}")
    return state


def threshold_check(
    rating: Fraction,
    threshold: Fraction,
    alpha: int,
    state: BlacklistState,
    seller: int,
    t: int,
) -> BlacklistState:
    """Isolate a seller whose just-published rating fell below the threshold.

    Isolation covers rounds t .. t+alpha-1; the seller rejoins in round
    t+alpha with the threshold value as his rating.  A rating exactly at the
    threshold is not punished.
    """
    if not 0 <= rating <= 1:
        raise PunishmentError("rating outside [0, 1]")
    if rating < threshold and not state.is_isolated(seller, t):
        state.isolated[seller] = (t + alpha - 1, Fraction(threshold))
    return state


def threshold_value(pricing: PricingRule, tier: str | None = None, v_high: Fraction | None = None) -> Fraction:
    """Punishment threshold implied by the pricing regime.

    Homogeneous: p / v, the rating below which expected utility goes
    negative.  Binary high tier: p_H / v_H for the same reason.  Binary low
    tier: the small epsilon carried by the rule, there only to keep an
    all-low strategy punishable.
    """
    if isinstance(pricing, Homogeneous):
        if v_high is None:
            raise PunishmentError("homogeneous threshold needs the high valuation")
        return pricing.p / v_high
    if isinstance(pricing, (BinaryNonAdaptive, BinaryAdaptive)):
        if tier == "H":
            if v_high is None:
                raise PunishmentError("high-tier threshold needs the high valuation")
            return pricing.p_high / v_high
        if tier == "L":
            return pricing.epsilon
        raise PunishmentError("binary threshold needs tier 'H' or 'L'")
    raise PunishmentError("no closed-form threshold for this pricing rule")
