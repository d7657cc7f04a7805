"""Pricing rules: one shared price, two price tiers, or rating-indexed.

Three regimes are supported.  Homogeneous pricing charges every seller the
same price p with valuations v (high) and 0 (low).  Binary pricing splits
sellers across a high tier p_H and a low tier p_L, either fixed for the whole
run (non-adaptive) or driven by each seller's public rating through an
isolate-then-discount state machine (adaptive).  Continuous pricing scales
the rating linearly into [p_L, p_H].

Both binary variants reduce to homogeneous instances once you know which
sellers can sustain which buyer utility, and that reduction is implemented
here.  Continuous pricing admits no such reduction; what it does admit is a
pairwise comparator telling a buyer which of two sellers she prefers, plus
the expected-customer bookkeeping used to reason about it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .numeric import ONE, ZERO


class PricingError(Exception):
    pass


class NotForSale(PricingError):
    """Price queried for a seller that is currently isolated."""


# --------------------------------------------------------------------------
# Rule variants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Homogeneous:
    p: Fraction

    kind = "homogeneous"


@dataclass(frozen=True)
class BinaryNonAdaptive:
    p_high: Fraction
    p_low: Fraction
    epsilon: Fraction
    assignment: tuple[str, ...]  # per seller: "H" | "L"

    kind = "binary_nonadaptive"

    def tier_of(self, seller: int) -> str:
        return self.assignment[seller]


@dataclass(frozen=True)
class BinaryAdaptive:
    p_high: Fraction
    p_low: Fraction
    epsilon: Fraction
    alpha: int  # isolation length in rounds

    kind = "binary_adaptive"


@dataclass(frozen=True)
class Continuous:
    p_high: Fraction
    p_low: Fraction

    kind = "continuous"


PricingRule = Homogeneous | BinaryNonAdaptive | BinaryAdaptive | Continuous


def validate_rule(rule: PricingRule, v_high: Fraction, v_low: Fraction, cost: Fraction | None = None):
    """Check the parameter chains each regime assumes.

    Homogeneous needs v > p > c > 0.  The two-tier regimes need
    p_H > p_H - c > p_L > p_L - c > 0 together with
    v_H - p_L > v_H - p_H > v_L - p_L > 0 > v_L - p_H.
    """
    if isinstance(rule, Homogeneous):
        if cost is not None and not (v_high > rule.p > cost > 0):
            raise PricingError("homogeneous pricing needs v > p > c > 0")
        if cost is None and not (v_high > rule.p > 0):
            raise PricingError("homogeneous pricing needs v > p > 0")
        return
    p_h, p_l = rule.p_high, rule.p_low
    if cost is not None:
        if not (p_h > p_h - cost > p_l > p_l - cost > 0):
            raise PricingError("tier prices must satisfy p_H > p_H-c > p_L > p_L-c > 0")
    elif not (p_h > p_l > 0):
        raise PricingError("tier prices must satisfy p_H > p_L > 0")
    if not (v_high - p_l > v_high - p_h > v_low - p_l > 0 > v_low - p_h):
        raise PricingError("valuations must order the tier utilities")
    if isinstance(rule, (BinaryNonAdaptive, BinaryAdaptive)):
        if not ZERO < rule.epsilon < 1:
            raise PricingError("epsilon must sit in (0, 1)")
    if isinstance(rule, BinaryAdaptive) and rule.alpha < 1:
        raise PricingError("isolation length must be at least 1")


# --------------------------------------------------------------------------
# Adaptive per-seller price state
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HighPrice:
    phase = "high"


@dataclass(frozen=True)
class Isolated:
    rounds_left: int
    saved_rating: Fraction

    phase = "isolated"


@dataclass(frozen=True)
class LowPrice:
    phase = "low"


AdaptiveSellerPriceState = HighPrice | Isolated | LowPrice


@dataclass(frozen=True)
class AdaptiveTransition:
    state: AdaptiveSellerPriceState
    rating_reset: Fraction | None = None  # set when rejoining after isolation


def adaptive_step(
    state: AdaptiveSellerPriceState,
    rating: Fraction,
    p_high: Fraction,
    p_low: Fraction,
    v_high: Fraction,
    v_low: Fraction,
    epsilon: Fraction,
    alpha: int,
) -> AdaptiveTransition:
    """One round of the adaptive price machine for a single seller.

    All sellers start at the high price.  A high-tier seller whose rating
    drops below p_H / v_H is pulled from the market for alpha rounds; on
    expiry he rejoins at the low price with his rating reset to
    max(epsilon, rating saved at the moment of isolation).  A low-tier
    seller is promoted back once his rating reaches
    1 - (p_H - p_L) / (v_H - v_L), the point where the rating-implied
    utility at the high price catches up.
    """
    if isinstance(state, HighPrice):
        if rating < p_high / v_high:
            return AdaptiveTransition(Isolated(alpha, rating))
        return AdaptiveTransition(state)
    if isinstance(state, Isolated):
        if state.rounds_left > 1:
            return AdaptiveTransition(Isolated(state.rounds_left - 1, state.saved_rating))
        reset = max(epsilon, state.saved_rating)
        return AdaptiveTransition(LowPrice(), rating_reset=reset)
    # LowPrice
    if rating >= ONE - (p_high - p_low) / (v_high - v_low):
        return AdaptiveTransition(HighPrice())
    return AdaptiveTransition(state)


def price_of(
    rule: PricingRule,
    seller: int,
    rating: Fraction,
    adaptive_state: AdaptiveSellerPriceState | None = None,
) -> Fraction:
    """Price quoted by one seller given his current public rating."""
    if not ZERO <= rating <= ONE:
        raise PricingError("rating outside [0, 1]")
    if isinstance(rule, Homogeneous):
        return rule.p
    if isinstance(rule, BinaryNonAdaptive):
        return rule.p_high if rule.tier_of(seller) == "H" else rule.p_low
    if isinstance(rule, BinaryAdaptive):
        if adaptive_state is None:
            raise PricingError("adaptive pricing needs the seller's price state")
        if isinstance(adaptive_state, Isolated):
            raise NotForSale(f"seller {seller} is isolated")
        if isinstance(adaptive_state, HighPrice):
            return rule.p_high
        return rule.p_low
    if isinstance(rule, Continuous):
        return rule.p_low + (rule.p_high - rule.p_low) * rating
    raise PricingError(f"unknown pricing rule {rule!r}")


# --------------------------------------------------------------------------
# Reduction of the two-tier regimes to homogeneous instances
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HomogeneousInstance:
    """A two-tier market collapsed onto one active seller set and price."""

    sellers: frozenset[int]
    p: Fraction
    first_round_pool: frozenset[int] | None = None  # where round-1 choices land


def binary_reduction(
    rule: BinaryNonAdaptive | BinaryAdaptive,
    sustainable_utilities: dict[int, Fraction],
    xi: Fraction,
    v_high: Fraction,
    v_low: Fraction,
    avoids_isolation: dict[int, bool] | None = None,
) -> HomogeneousInstance:
    """Collapse a binary-pricing market onto the homogeneous case it plays as.

    ``sustainable_utilities[s]`` is the best per-round buyer utility seller s
    can credibly keep delivering.  Non-adaptive: if some low-tier seller
    sustains at least xi*v_H + (1-xi)*v_L - p_H (what a fresh high-tier
    seller appears to offer), trade stays in the low tier; otherwise if some
    high-tier seller sustains at least v_L - p_L, trade moves to the high
    tier; failing both, it falls back to the low tier.  Buyers start by
    choosing at random within the low tier either way.

    Adaptive: sellers able to avoid isolation trade at p_H; if none can, the
    whole market trades at p_L.
    """
    if isinstance(rule, BinaryAdaptive):
        if avoids_isolation is None:
            raise PricingError("adaptive reduction needs the isolation-avoidance map")
        survivors = frozenset(s for s, ok in avoids_isolation.items() if ok)
        if survivors:
            return HomogeneousInstance(survivors, rule.p_high)
        return HomogeneousInstance(frozenset(avoids_isolation), rule.p_low)

    low = frozenset(s for s in sustainable_utilities if rule.tier_of(s) == "L")
    high = frozenset(s for s in sustainable_utilities if rule.tier_of(s) == "H")
    high_tier_lure = xi * v_high + (ONE - xi) * v_low - rule.p_high
    if any(sustainable_utilities[s] >= high_tier_lure for s in low):
        return HomogeneousInstance(low, rule.p_low, first_round_pool=low)
    if any(sustainable_utilities[s] >= v_low - rule.p_low for s in high):
        return HomogeneousInstance(high, rule.p_high, first_round_pool=low)
    return HomogeneousInstance(low, rule.p_low, first_round_pool=low)


# --------------------------------------------------------------------------
# Continuous-pricing comparisons
# --------------------------------------------------------------------------

def compare_sellers_continuous(
    theta: Fraction,
    phi1: Fraction,
    phi2: Fraction,
    eps1: Fraction,
    eps2: Fraction,
    beta: Fraction,
) -> int:
    """Which of two sellers a buyer prefers under rating-indexed prices.

    phi_i is the buyer's own history with seller i, eps_i the seller's public
    rating, theta the weight on own history, and beta = (p_H-p_L)/(v_H-v_L)
    the price-to-value spread.  Returns 1, 2, or 0 for indifferent.

    With equal ratings the better personal history wins.  Otherwise seller 1
    wins exactly when theta*(1 - (phi1-phi2)/(eps1-eps2)) falls on the right
    side of 1 - beta (below it when seller 1 is the higher rated, above it
    when seller 2 is).  Exact ties on that comparison go to the higher-rated
    seller, which keeps the choice deterministic.
    """
    for name, value in (("phi1", phi1), ("phi2", phi2), ("eps1", eps1), ("eps2", eps2)):
        if not ZERO <= value <= ONE:
            raise PricingError(f"{name} outside [0, 1]")
    if eps1 == eps2:
        if phi1 > phi2:
            return 1
        if phi2 > phi1:
            return 2
        return 0
    lhs = theta * (ONE - (phi1 - phi2) / (eps1 - eps2))
    rhs = ONE - beta
    if eps1 > eps2:
        return 1 if lhs <= rhs else 2
    return 1 if lhs > rhs else 2


def expected_customers(
    history_class: str,
    strategy_k: int,
    b_t: int,
    beta: Fraction,
    n_buyers: int,
) -> Fraction:
    """Expected customers next round for a seller under continuous pricing.

    ``history_class`` describes the seller's record so far: "always_high"
    (he keeps the all-high strategy), "was_high" (all-high record until now,
    this round he serves k highs then lows), or "not_high" (his record
    already shows lows).  ``b_t`` is his current customer count.
    """
    if not 0 <= strategy_k <= b_t <= n_buyers:
        raise PricingError("need 0 <= k <= b_t <= n_B")
    if history_class == "always_high":
        return Fraction(b_t)
    if history_class == "was_high":
        return beta * (n_buyers + strategy_k - b_t)
    if history_class == "not_high":
        return Fraction(strategy_k)
    raise PricingError(f"unknown history class {history_class!r}")
