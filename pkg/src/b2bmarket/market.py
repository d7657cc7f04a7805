"""Agent model and round loop for the procurement market.

Buyers repeatedly pick one seller each round, receive a quality, and file a
rating.  Three quantities drive selection, all exact rationals in [0, 1]:

* personal history h: a buyer's own discounted frequency of high-quality
  deliveries from a seller, with calendar-indexed weights (a skipped round
  still ages the older data).  A buyer who never traded with a seller falls
  back to the initial perception xi, switching permanently to the public
  rating once that rating has ever exceeded xi.
* public rating Q: the market-wide discounted fraction of a seller's sales
  rated high, recomputed each round under a freshly drawn discount so that
  individual feedback cannot be solved for.  Sellers who never sold sit at
  xi.
* personal perception q: the theta-weighted blend of the two.

A buyer chooses the seller maximizing q*v_H + (1-q)*v_L - price among those
she is not blacklisting and who are not isolated.  Ties go to the seller who
most recently delivered her a high-quality product, and otherwise to a
uniform draw, so the very first choice is always random.

Sellers play one quality policy toward all buyers: always high, always low,
a periodic k-highs-then-one-low cycle, or an explicit script used to inject
deviations in tests.  Feedback inside this engine is always honest;
dishonesty is exercised through the regulation layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import pricing as pricing_mod
from . import punishment as punishment_mod
from .framework import EventStore, Participant, TransactionRecord
from .numeric import ONE, ZERO, discounted_ratio
from .rng import StreamFamily, draw_discount


class MarketError(Exception):
    pass


class HistoryError(MarketError):
    pass


# --------------------------------------------------------------------------
# Configuration and per-agent state
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MarketConfig:
    n_buyers: int
    n_sellers: int
    xi: Fraction              # initial perception
    tau: Fraction             # lower bound for buyer discounts, > 1/2
    tau_bar: Fraction         # lower bound for the per-round rating discount
    v_high: Fraction
    v_low: Fraction
    rounds: int
    seed: int

    def __post_init__(self):
        if self.n_buyers <= 2 or self.n_sellers <= 2:
            raise MarketError("buyer and seller counts must be strictly greater than 2")
        if not ZERO < self.xi < ONE:
            raise MarketError("xi must sit in (0, 1)")
        if not self.tau > Fraction(1, 2):
            raise MarketError("tau must exceed 1/2")
        if not ZERO < self.tau_bar < ONE:
            raise MarketError("tau_bar must sit in (0, 1)")
        if not self.v_high > self.v_low >= ZERO:
            raise MarketError("valuations must satisfy v_H > v_L >= 0")
        if self.rounds < 1:
            raise MarketError("need at least one round")


class AlwaysHigh:
    """Always deliver high quality."""

    kind = "always_high"

    def quality(self, t: int) -> str:
        return "High"


class AlwaysLow:
    """Always deliver low quality."""

    kind = "always_low"

    def quality(self, t: int) -> str:
        return "Low"


class Periodic:
    """k high-quality rounds, then one low, repeating."""

    kind = "periodic"

    def __init__(self, k: int):
        if k < 1:
            raise MarketError("periodic strategy needs k >= 1")
        self.k = k

    def quality(self, t: int) -> str:
        return "High" if (t - 1) % (self.k + 1) < self.k else "Low"


class Scripted:
    """Explicit per-round quality list; drives deviation experiments."""

    kind = "scripted"

    def __init__(self, qualities: list[str]):
        for q in qualities:
            if q not in ("High", "Low"):
                raise MarketError(f"scripted quality must be High or Low, got {q!r}")
        self.qualities = list(qualities)

    def quality(self, t: int) -> str:
        if t > len(self.qualities):
            raise MarketError(f"script ends before round {t}")
        return self.qualities[t - 1]


@dataclass
class BuyerState:
    delta: Fraction                 # own-history discount, in (tau, 1)
    theta: Fraction                 # weight on own history, in [0, 1]
    # Incremental numerator/denominator of the personal-history ratio,
    # one pair per seller, plus the raw per-round bits for audits.
    hist_num: list[Fraction] = field(default_factory=list)
    hist_den: list[Fraction] = field(default_factory=list)
    iq_bits: list[list[int]] = field(default_factory=list)
    it_bits: list[list[int]] = field(default_factory=list)
    last_high_round: dict[int, int] = field(default_factory=dict)


@dataclass
class SellerState:
    sigma: Fraction                 # future-payoff discount, in (0, 1)
    cost: Fraction                  # cost of producing high quality
    strategy: object                # quality policy
    price_state: object = None      # adaptive-pricing phase, when applicable
    discounted_utility: Fraction = ZERO
    sale_qualities: list[tuple[int, str]] = field(default_factory=list)


@dataclass(frozen=True)
class RoundSummary:
    """Public per-round data: who sold, and how their sales were rated."""

    t: int
    sold: tuple[int, ...]                    # I_T per seller, 0/1
    rated_high: tuple[Fraction | None, ...]  # I_Q per seller, None when no sale

    @property
    def sellers_with_sales(self) -> frozenset[int]:
        return frozenset(s for s, bit in enumerate(self.sold) if bit)


@dataclass
class PublicPerception:
    """Published rating history plus the per-round discount draws."""

    ratings: list[list[Fraction]] = field(default_factory=list)  # ratings[t-1][s]
    discounts: list[Fraction] = field(default_factory=list)      # delta_M per round

    def series_for(self, seller: int) -> list[Fraction]:
        return [row[seller] for row in self.ratings]


# --------------------------------------------------------------------------
# The rating and perception formulas
# --------------------------------------------------------------------------

def personal_history(
    iq_bits: list[int],
    it_bits: list[int],
    delta_b: Fraction,
    xi: Fraction,
    seller_public_ratings: list[Fraction],
) -> Fraction:
    """Buyer's discounted high-quality frequency with one seller at round t.

    ``iq_bits``/``it_bits`` cover rounds 1..t-1 of the buyer's own record;
    ``seller_public_ratings`` covers the published ratings through round t.
    With no transactions the value falls back to xi while the public rating
    has never exceeded it, and to the current public rating afterwards
    (an optimist stops being one only once, and for good).
    """
    t = len(seller_public_ratings)
    if len(iq_bits) != len(it_bits):
        raise HistoryError("bit columns differ in length")
    if len(it_bits) != t - 1:
        raise HistoryError(f"own history must cover rounds 1..{t - 1}")
    if any(it_bits):
        return discounted_ratio(iq_bits, it_bits, delta_b, anchor=xi)
    if all(q <= xi for q in seller_public_ratings):
        return xi
    return seller_public_ratings[-1]


def personal_perception(h: Fraction, public: Fraction, theta: Fraction) -> Fraction:
    return theta * h + (ONE - theta) * public


def expected_utility(q: Fraction, v_high: Fraction, v_low: Fraction, price: Fraction) -> Fraction:
    return q * v_high + (ONE - q) * v_low - price


def stage_payoffs(
    quality: str,
    price: Fraction,
    cost: Fraction,
    v_high: Fraction,
    v_low: Fraction,
) -> tuple[Fraction, Fraction]:
    """Single-transaction (buyer, seller) payoffs."""
    if quality == "High":
        return v_high - price, price - cost
    if quality == "Low":
        return v_low - price, price
    raise MarketError(f"quality must be High or Low, got {quality!r}")


def select_seller(
    perceptions: dict[int, Fraction],
    prices: dict[int, Fraction],
    v_high: Fraction,
    v_low: Fraction,
    excluded,
    last_high_round: dict[int, int],
    stream,
) -> int | None:
    """Argmax of expected utility with the two-stage tie rule.

    Among tied sellers, one who most recently delivered this buyer a
    high-quality product wins; with no such record the draw is uniform.
    Returns None when every seller is excluded: the buyer sits the round out.
    """
    candidates = [s for s in sorted(perceptions) if s not in excluded]
    if not candidates:
        return None
    utilities = {
        s: expected_utility(perceptions[s], v_high, v_low, prices[s])
        for s in candidates
    }
    best = max(utilities.values())
    tied = [s for s in candidates if utilities[s] == best]
    if len(tied) == 1:
        return tied[0]
    with_high = [s for s in tied if s in last_high_round]
    if with_high:
        return max(with_high, key=lambda s: last_high_round[s])
    return stream.choice(tied)


def oracle_public_perception(
    summaries: list[RoundSummary],
    delta_m: Fraction,
    xi: Fraction,
    epoch_starts: list[int] | None = None,
    anchors: list[Fraction] | None = None,
    n_sellers: int | None = None,
) -> list[Fraction]:
    """Reference computation of the round-t rating vector, t = len+1.

    This is the trusted-party view: it reads every seller's true per-round
    sale fractions directly.  ``epoch_starts``/``anchors`` support the
    rating resets issued by market-wide punishment; by default each seller's
    whole history counts and the anchor is xi.
    """
    if n_sellers is None:
        if not summaries:
            raise MarketError("need n_sellers when no summaries are given")
        n_sellers = len(summaries[0].sold)
    for i, summary in enumerate(summaries):
        if summary.t != i + 1:
            raise HistoryError("round summaries must be contiguous from round 1")
    t = len(summaries) + 1
    out = []
    for s in range(n_sellers):
        start = epoch_starts[s] if epoch_starts else 1
        anchor = anchors[s] if anchors else xi
        iq = []
        it = []
        for summary in summaries[start - 1:]:
            sold = summary.sold[s]
            it.append(sold)
            iq.append(summary.rated_high[s] if sold else 0)
        out.append(discounted_ratio(iq, it, delta_m, anchor))
    return out


# --------------------------------------------------------------------------
# Round outcomes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Purchase:
    buyer: int
    seller: int
    price: Fraction
    quality: str
    rating: int  # 1 high, 0 low


@dataclass
class RoundOutcome:
    t: int
    ratings: list[Fraction]           # published at the start of the round
    delta_m: Fraction
    purchases: list[Purchase]
    summary: RoundSummary
    isolated: frozenset[int]          # sellers excluded this round
    prices: dict[int, Fraction]       # quoted prices, selling sellers only
    audit: object = None


class MarketState:
    """Everything one simulated market carries between rounds."""

    def __init__(
        self,
        config: MarketConfig,
        buyers: list[BuyerState],
        sellers: list[SellerState],
        pricing_rule,
        policy,
        streams: StreamFamily | None = None,
    ):
        if len(buyers) != config.n_buyers or len(sellers) != config.n_sellers:
            raise MarketError("agent lists must match the configured counts")
        for b in buyers:
            if not config.tau < b.delta < ONE:
                raise MarketError("buyer discount must sit in (tau, 1)")
            if not ZERO <= b.theta <= ONE:
                raise MarketError("theta must sit in [0, 1]")
            b.hist_num = [ZERO] * config.n_sellers
            b.hist_den = [ZERO] * config.n_sellers
            b.iq_bits = [[] for _ in range(config.n_sellers)]
            b.it_bits = [[] for _ in range(config.n_sellers)]
        for s in sellers:
            if not ZERO < s.sigma < ONE:
                raise MarketError("seller discount must sit in (0, 1)")
            if not s.cost > ZERO:
                raise MarketError("high-quality cost must be positive")
            if isinstance(pricing_rule, pricing_mod.BinaryAdaptive):
                s.price_state = pricing_mod.HighPrice()
        self.config = config
        self.buyers = buyers
        self.sellers = sellers
        self.pricing = pricing_rule
        self.policy = policy
        self.streams = streams or StreamFamily(config.seed)
        self.blacklists = punishment_mod.BlacklistState()
        self.perception = PublicPerception()
        self.summaries: list[RoundSummary] = []
        self.epoch_starts = [1] * config.n_sellers
        self.anchors = [config.xi] * config.n_sellers
        self.exceeded_xi = [False] * config.n_sellers
        self.t = 1
        self.store = EventStore()
        for b in range(config.n_buyers):
            self.store.register(Participant(f"b{b}", "buyer"))
        for s in range(config.n_sellers):
            self.store.register(Participant(f"s{s}", "seller"))
        # Attached by the harness when the encrypted rating path runs too.
        self.protocol_bridge = None

    # -- publication ----------------------------------------------------

    def seller_threshold(self, seller: int) -> Fraction:
        policy = self.policy
        rule = self.pricing
        if isinstance(rule, pricing_mod.BinaryNonAdaptive):
            return punishment_mod.threshold_value(
                rule, tier=rule.tier_of(seller), v_high=self.config.v_high
            )
        if isinstance(rule, pricing_mod.BinaryAdaptive):
            # The price machine polices the high tier; the low tier keeps
            # the epsilon floor so an all-low seller stays punishable.
            if isinstance(self.sellers[seller].price_state, pricing_mod.LowPrice):
                return rule.epsilon
            return ZERO
        return policy.threshold

    def publish_ratings(self) -> tuple[list[Fraction], Fraction]:
        """Compute and publish the round-t rating vector.

        Order matters: clock-driven rejoins reset epochs first, then the
        ratings are evaluated, then rating-driven transitions (isolation
        triggers, price-tier moves) fire for the upcoming selection.
        """
        t = self.t
        cfg = self.config
        for s in range(cfg.n_sellers):
            reset = self.blacklists.pop_expired_isolation(s, t)
            if reset is not None:
                self.epoch_starts[s] = t
                self.anchors[s] = reset
        adaptive = isinstance(self.pricing, pricing_mod.BinaryAdaptive)
        if adaptive:
            for s, seller in enumerate(self.sellers):
                if isinstance(seller.price_state, pricing_mod.Isolated) and \
                        seller.price_state.rounds_left <= 0:
                    raise MarketError("isolation clock underflow")
        delta_m = draw_discount(self.streams.stream("delta_m"), cfg.tau_bar)
        ratings = oracle_public_perception(
            self.summaries, delta_m, cfg.xi,
            epoch_starts=self.epoch_starts, anchors=self.anchors,
            n_sellers=cfg.n_sellers,
        )
        if adaptive:
            rule = self.pricing
            for s, seller in enumerate(self.sellers):
                step = pricing_mod.adaptive_step(
                    seller.price_state, ratings[s],
                    rule.p_high, rule.p_low, cfg.v_high, cfg.v_low,
                    rule.epsilon, rule.alpha,
                )
                seller.price_state = step.state
                if step.rating_reset is not None:
                    self.epoch_starts[s] = t
                    self.anchors[s] = step.rating_reset
                    ratings[s] = step.rating_reset
        if isinstance(self.policy, punishment_mod.Threshold):
            for s in range(cfg.n_sellers):
                threshold = self.seller_threshold(s)
                if threshold > ZERO:
                    punishment_mod.threshold_check(
                        ratings[s], threshold, self.policy.alpha,
                        self.blacklists, s, t,
                    )
        self.perception.ratings.append(list(ratings))
        self.perception.discounts.append(delta_m)
        for s in range(cfg.n_sellers):
            if ratings[s] > cfg.xi:
                self.exceeded_xi[s] = True
        return ratings, delta_m

    # -- perception helpers ----------------------------------------------

    def xi_bar(self, seller: int) -> Fraction:
        if self.exceeded_xi[seller]:
            return self.perception.ratings[-1][seller]
        return self.config.xi

    def buyer_history(self, buyer: int, seller: int) -> Fraction:
        b = self.buyers[buyer]
        if b.hist_den[seller] > ZERO:
            return b.hist_num[seller] / b.hist_den[seller]
        return self.xi_bar(seller)

    def excluded_for(self, buyer: int) -> set[int]:
        t = self.t
        out = set()
        for s in range(self.config.n_sellers):
            if self.blacklists.is_blacklisted(buyer, s, t):
                out.add(s)
            elif self.blacklists.is_isolated(s, t):
                out.add(s)
            elif isinstance(self.sellers[s].price_state, pricing_mod.Isolated):
                out.add(s)
        return out

    def quoted_price(self, seller: int, rating: Fraction) -> Fraction:
        return pricing_mod.price_of(
            self.pricing, seller, rating,
            adaptive_state=self.sellers[seller].price_state,
        )

    # -- the round -------------------------------------------------------

    def run_round(self) -> RoundOutcome:
        if self.t > self.config.rounds:
            raise MarketError("run is already complete")
        cfg = self.config
        t = self.t
        ratings, delta_m = self.publish_ratings()

        audit = None
        if self.protocol_bridge is not None:
            audit = self.protocol_bridge.on_publish(self, ratings, delta_m)

        isolated = frozenset(
            s for s in range(cfg.n_sellers)
            if self.blacklists.is_isolated(s, t)
            or isinstance(self.sellers[s].price_state, pricing_mod.Isolated)
        )
        round_prices = {
            s: self.quoted_price(s, ratings[s])
            for s in range(cfg.n_sellers) if s not in isolated
        }

        select_stream = self.streams.stream("select")
        purchases: list[Purchase] = []
        for b in range(cfg.n_buyers):
            buyer = self.buyers[b]
            excluded = self.excluded_for(b)
            perceptions = {}
            for s in range(cfg.n_sellers):
                if s in excluded:
                    continue
                h = self.buyer_history(b, s)
                perceptions[s] = personal_perception(h, ratings[s], buyer.theta)
            chosen = select_seller(
                perceptions, round_prices, cfg.v_high, cfg.v_low,
                excluded, buyer.last_high_round, select_stream,
            )
            if chosen is None:
                continue
            quality = self.sellers[chosen].strategy.quality(t)
            price = round_prices[chosen]
            purchases.append(Purchase(b, chosen, price, quality, 1 if quality == "High" else 0))

        # Delivery effects and honest feedback.
        per_seller_bits: dict[int, list[int]] = {}
        for purchase in purchases:
            s = purchase.seller
            seller = self.sellers[s]
            cost = seller.cost if purchase.quality == "High" else ZERO
            _, seller_gain = stage_payoffs(
                purchase.quality, purchase.price, seller.cost, cfg.v_high, cfg.v_low
            )
            seller.discounted_utility += seller.sigma ** (t - 1) * seller_gain
            seller.sale_qualities.append((t, purchase.quality))
            per_seller_bits.setdefault(s, []).append(purchase.rating)
            buyer = self.buyers[purchase.buyer]
            h_before = self.buyer_history(purchase.buyer, s)
            q_before = personal_perception(h_before, ratings[s], buyer.theta)
            punishment_mod.apply_feedback(
                self.policy, purchase.buyer, s, purchase.quality,
                q_before, self.blacklists, t,
            )
            if purchase.quality == "High":
                buyer.last_high_round[s] = t
            self.store.append_event(
                {f"b{purchase.buyer}", f"s{s}"},
                TransactionRecord(
                    price=purchase.price, cost=cost,
                    quality=purchase.quality, rating=Fraction(purchase.rating),
                ),
            )

        # Advance every buyer's incremental history by one calendar round.
        bought = {(p.buyer, p.seller): p.rating for p in purchases}
        for b, buyer in enumerate(self.buyers):
            for s in range(cfg.n_sellers):
                rating_bit = bought.get((b, s))
                it_bit = 1 if rating_bit is not None else 0
                iq_bit = rating_bit or 0
                buyer.hist_num[s] = buyer.delta * buyer.hist_num[s] + iq_bit
                buyer.hist_den[s] = buyer.delta * buyer.hist_den[s] + it_bit
                buyer.iq_bits[s].append(iq_bit)
                buyer.it_bits[s].append(it_bit)

        sold = tuple(1 if s in per_seller_bits else 0 for s in range(cfg.n_sellers))
        rated = tuple(
            Fraction(sum(bits), len(bits)) if (bits := per_seller_bits.get(s)) else None
            for s in range(cfg.n_sellers)
        )
        summary = RoundSummary(t, sold, rated)
        self.summaries.append(summary)

        if self.protocol_bridge is not None:
            self.protocol_bridge.on_feedback(self, purchases, summary)

        self.t += 1
        return RoundOutcome(
            t, ratings, delta_m, purchases, summary, isolated, round_prices, audit
        )

    def run(self) -> list[RoundOutcome]:
        return [self.run_round() for _ in range(self.config.rounds - self.t + 1)]
