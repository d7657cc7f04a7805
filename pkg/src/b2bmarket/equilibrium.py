"""Equilibrium regimes under homogeneous pricing, and their verification.

Closed forms.  A seller keeps delivering high quality exactly when the cost
of doing so is below his discounted price, c < sigma*p: one low delivery
costs him his customers, so the comparison is the full discounted margin
stream against a single round of saved cost.  Always-low becomes dominant
once c exceeds a policy-dependent bound: the deviation to one high delivery
would pull in the whole market next round, and the bound prices that pull
against the punishment cycle that follows.  Between the two thresholds no
pure stationary profile survives: the periodic k-highs-one-low family is
infeasible because the cost ceiling that keeps the high rounds honest always
sits strictly below the cost floor that keeps the low round honest.

Verification.  Each closed-form verdict can be cross-checked by a truncated
replay of the market dynamics: play the profile, inject a single-round
quality deviation at a stationary history, and compare exact discounted
utility streams.  Buyer selection under the symmetric profiles reduces to
per-buyer eligibility clocks, so the replay propagates exact expected
customer masses instead of sampling, which keeps the comparison rational and
deterministic.  The truncation horizon is chosen so the discarded tail is
provably below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .numeric import ONE, ZERO
from .punishment import GrimTrigger, Limited, Threshold, TitForTat


class EquilibriumError(Exception):
    pass


class UnsupportedProfile(EquilibriumError):
    pass


# --------------------------------------------------------------------------
# Closed-form conditions and bounds
# --------------------------------------------------------------------------

def always_high_condition(cost: Fraction, p: Fraction, sigma: Fraction) -> bool:
    """Always-high survives one-shot deviation iff c < sigma * p (strict)."""
    if not ZERO < sigma < ONE:
        raise EquilibriumError("sigma must sit in (0, 1)")
    if cost <= ZERO or p <= ZERO:
        raise EquilibriumError("cost and price must be positive")
    return cost < sigma * p


def always_low_bound(
    policy,
    p: Fraction,
    sigma: Fraction,
    n_buyers: int,
    n_sellers: int,
    threshold_variant: str = "proof",
) -> Fraction:
    """Cost level above which always-low is a dominant strategy.

    The bound compares staying low forever (price every round, market share
    1/n_S) against one high delivery that attracts every buyer and then
    rides the punishment cycle.  The threshold policy carries two algebraic
    variants of its bound, "proof" (default) and "statement"; they coincide
    at sigma = 1/2 and diverge elsewhere, so both are kept and callers pick.
    """
    if not ZERO < sigma < ONE:
        raise EquilibriumError("sigma must sit in (0, 1)")
    if n_buyers < 3 or n_sellers < 2:
        # Full markets carry at least 3 sellers; two-tier reductions may
        # legitimately leave 2 active ones, and the algebra still applies.
        raise EquilibriumError("need at least 3 buyers and 2 sellers")
    if isinstance(policy, TitForTat):
        return p * sigma * n_buyers * (
            ONE / (ONE - sigma ** 2) - ONE / (n_sellers * (ONE - sigma))
        )
    if isinstance(policy, Limited):
        a = policy.alpha
        return p * sigma * n_buyers * (
            ONE / (ONE - sigma ** (a + 1)) - ONE / (n_sellers * (ONE - sigma))
        )
    if isinstance(policy, Threshold):
        a = policy.alpha
        lead = sigma * p * n_buyers / (ONE - sigma ** (a + 1))
        if threshold_variant == "proof":
            return lead * (ONE - sigma ** (a + 2) / (n_sellers * (ONE - sigma)))
        if threshold_variant == "statement":
            return lead * (ONE - sigma ** (a + 1) / n_sellers)
        raise EquilibriumError(f"unknown threshold variant {threshold_variant!r}")
    raise EquilibriumError(f"no always-low bound for policy {policy!r}")


def periodic_bounds(
    p: Fraction, sigma: Fraction, k: int, n_buyers: int
) -> tuple[Fraction, Fraction]:
    """Cost ceiling and floor for the periodic k-highs-one-low strategy.

    Below the ceiling there is no incentive to cut a high round short;
    above the floor there is no incentive to upgrade the low round.  The
    ceiling is always strictly below the floor, which is what rules the
    whole family out.
    """
    if k < 1:
        raise EquilibriumError("the periodic strategy needs k >= 1")
    if not ZERO < sigma < ONE:
        raise EquilibriumError("sigma must sit in (0, 1)")
    upper = p * sigma * (ONE - sigma ** (k - 1) + 2 * sigma ** k * (ONE - sigma)) \
        / (ONE - sigma ** k)
    lower_num = p * sigma * (ONE - sigma ** k + sigma ** (k + 1) * (ONE - sigma)) \
        * (n_buyers - 1)
    lower_den = (ONE - sigma ** (k + 1)) * (ONE - sigma) \
        + sigma * (ONE - sigma ** k) * (n_buyers - 1)
    return upper, lower_num / lower_den


DEFAULT_SIGMA_GRID = tuple(Fraction(n, 100) for n in range(51, 100, 2))


@dataclass
class SweepReport:
    passed: bool
    points_checked: int
    counterexamples: list[dict] = field(default_factory=list)


def periodic_infeasibility_sweep(
    sigmas=DEFAULT_SIGMA_GRID,
    ks=range(1, 13),
    n_buyers_range=range(3, 11),
    upper_fn=periodic_bounds,
) -> SweepReport:
    """Exhaustive infeasibility check for the periodic family.

    At every grid point the ceiling must sit strictly below the floor, and
    the two algebraic facts behind that ordering must hold exactly: the
    floor-minus-ceiling numerator difference equals sigma**(k-1)*(1-sigma)**3
    (hence is positive), and the ceiling's denominator strictly dominates
    the floor's.  ``upper_fn`` is injectable so a deliberately perturbed
    bound can demonstrate that counterexamples are in fact reported.
    """
    report = SweepReport(True, 0)
    for sigma in sigmas:
        for k in ks:
            for n_b in n_buyers_range:
                report.points_checked += 1
                upper, lower = upper_fn(ONE, sigma, k, n_b)
                problems = []
                if not upper < lower:
                    problems.append("ceiling not below floor")
                up_core = ONE - sigma ** (k - 1) + 2 * sigma ** k * (ONE - sigma)
                low_core = ONE - sigma ** k + sigma ** (k + 1) * (ONE - sigma)
                diff = low_core - up_core
                if diff != sigma ** (k - 1) * (ONE - sigma) ** 3 or diff <= ZERO:
                    problems.append("numerator identity fails")
                x = (ONE - sigma ** (k + 1)) * (ONE - sigma) / (n_b - 1)
                if not (ONE - sigma ** k) > x + sigma * (ONE - sigma ** k):
                    problems.append("denominator domination fails")
                if problems:
                    report.passed = False
                    report.counterexamples.append({
                        "sigma": sigma, "k": k, "n_buyers": n_b,
                        "problems": problems,
                    })
    return report


def compare_punishments(
    p: Fraction,
    sigma: Fraction,
    n_buyers: int,
    n_sellers: int,
    alpha: int,
    threshold_variant: str = "statement",
) -> Fraction:
    """Threshold-policy always-low bound minus the limited-policy one.

    A positive value means market-wide punishment leaves less room for the
    always-low regime than per-buyer punishment of the same length.  The
    "statement" variant is the default here: the "proof" variant loses
    positivity at high sigma and would falsify the comparison this function
    exists to quantify; the two coincide at sigma = 1/2.
    """
    threshold = always_low_bound(
        Threshold(Fraction(1, 2), alpha), p, sigma, n_buyers, n_sellers,
        threshold_variant=threshold_variant,
    )
    limited = always_low_bound(Limited(alpha), p, sigma, n_buyers, n_sellers)
    return threshold - limited


def max_sustainable_utility(
    sigma: Fraction,
    cost: Fraction,
    price: Fraction,
    v_high: Fraction,
    v_low: Fraction,
    n_buyers: int,
    k_max: int = 12,
) -> Fraction:
    """Best per-round buyer utility a seller can credibly keep delivering.

    A quality policy counts as sustainable when it clears its one-shot
    deviation bounds at this price.  Always-high qualifies iff
    cost < sigma * price.  The periodic k-highs-one-low family (k up to
    ``k_max``) is swept too, crediting the long-run high share
    k/(k+1) of the quality premium, but its cost window is empty at every
    k, so it never improves the answer.  Always-low needs no incentive and
    is the floor.
    """
    if always_high_condition(cost, price, sigma):
        return v_high - price
    best = v_low - price
    for k in range(1, k_max + 1):
        upper, lower = periodic_bounds(price, sigma, k, n_buyers)
        if lower < cost < upper:
            offered = Fraction(k, k + 1) * (v_high - v_low) + v_low - price
            if offered > best:
                best = offered
    return best


def continuous_preference(
    theta: Fraction, phi: Fraction, eps: Fraction, beta: Fraction
) -> bool:
    """Does a buyer pick the perfectly rated seller over a discounted one?

    phi and eps are the drops in her own history and in the public rating of
    the cheaper seller.  True iff theta*(1 - phi/eps) < 1 - beta.
    """
    if eps <= ZERO:
        raise EquilibriumError("eps must be positive")
    if phi < ZERO:
        raise EquilibriumError("phi must be non-negative")
    return theta * (ONE - phi / eps) < ONE - beta


# --------------------------------------------------------------------------
# Regime classification
# --------------------------------------------------------------------------

ALWAYS_HIGH = "always_high"
ALWAYS_LOW = "always_low"
NO_PURE_PROFILE = "no_pure_profile"
MONOPOLY = "monopoly_unclassified"


@dataclass
class SellerRegime:
    seller: int
    regime: str
    sigma_p: Fraction
    l_bound: Fraction | None
    cost: Fraction


@dataclass
class RegimeReport:
    p: Fraction
    policy_kind: str
    per_seller: list[SellerRegime]
    verified: dict[int, bool] = field(default_factory=dict)

    def regimes(self) -> list[str]:
        return [entry.regime for entry in self.per_seller]


def classify_equilibrium(
    sellers: list[tuple[Fraction, Fraction]],
    p: Fraction,
    policy,
    n_buyers: int,
    threshold_variant: str = "proof",
) -> RegimeReport:
    """Regime per seller under homogeneous pricing (or a two-tier reduction).

    With at least two sellers below the always-high threshold, those play
    always-high and everyone else always-low.  With none, a seller plays
    always-low when his cost clears the policy bound, and the strict middle
    band admits no pure stationary profile.  A single seller below the
    threshold is a monopoly and is reported rather than classified.
    Rating-indexed (continuous) pricing has no closed-form classification.
    """
    n_sellers = len(sellers)
    survivors = [
        i for i, (sigma, cost) in enumerate(sellers)
        if always_high_condition(cost, p, sigma)
    ]
    per_seller = []
    for i, (sigma, cost) in enumerate(sellers):
        if isinstance(policy, GrimTrigger) or n_sellers == 1:
            # An unrivaled seller keeps every buyer regardless; delaying low
            # quality never pays once c exceeds sigma*p.
            bound = sigma * p
        else:
            bound = always_low_bound(
                policy, p, sigma, n_buyers, n_sellers,
                threshold_variant=threshold_variant,
            )
        if len(survivors) >= 2:
            regime = ALWAYS_HIGH if i in survivors else ALWAYS_LOW
        elif len(survivors) == 1:
            regime = MONOPOLY if i in survivors else (
                ALWAYS_LOW if cost > bound else NO_PURE_PROFILE
            )
        else:
            regime = ALWAYS_LOW if cost > bound else NO_PURE_PROFILE
        per_seller.append(SellerRegime(i, regime, sigma * p, bound, cost))
    return RegimeReport(p, policy.kind, per_seller)


# --------------------------------------------------------------------------
# One-deviation verification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviationCheck:
    holds: bool
    violation: str | None = None


def truncation_horizon(
    sigma: Fraction, p: Fraction, n_buyers: int, tol: Fraction
) -> int:
    """Smallest horizon whose discarded tail sigma**T * p * n_B / (1-sigma)
    falls below ``tol``."""
    bound = p * n_buyers / (ONE - sigma)
    t = 1
    power = sigma
    while power * bound >= tol:
        power *= sigma
        t += 1
    return t


def _profile_shapes(profile: list) -> set[str]:
    shapes = set()
    for strategy in profile:
        kind = getattr(strategy, "kind", None)
        if kind not in ("always_high", "always_low", "periodic"):
            raise UnsupportedProfile(f"unsupported strategy shape {strategy!r}")
        shapes.add(kind)
    return shapes


def one_deviation_check(
    profile: list,
    p: Fraction,
    sellers: list[tuple[Fraction, Fraction]],
    policy,
    n_buyers: int,
    mode: str = "closed_form",
    tol: Fraction = Fraction(1, 10 ** 9),
    threshold_variant: str = "proof",
) -> DeviationCheck:
    """Does any seller gain from a single-round quality deviation?

    ``profile`` holds one market.AlwaysHigh / market.AlwaysLow / market.Periodic per
    seller; ``sellers`` their (sigma, cost) parameters.  Closed-form mode
    evaluates the discounted-sum comparisons behind the regime bounds.
    Simulation mode replays the profile and its deviations through the
    market dynamics, truncated where the tail is below ``tol``.
    """
    if mode == "closed_form":
        return _closed_form_check(
            profile, p, sellers, policy, n_buyers, threshold_variant
        )
    if mode == "simulation":
        return _simulation_check(profile, p, sellers, policy, n_buyers, tol)
    raise EquilibriumError(f"unknown mode {mode!r}")


def _closed_form_check(profile, p, sellers, policy, n_buyers, threshold_variant):
    shapes = _profile_shapes(profile)
    n_sellers = len(profile)
    high_count = sum(s.kind == "always_high" for s in profile)
    if shapes == {"always_high"} or (
        shapes == {"always_high", "always_low"} and high_count >= 2
    ):
        # Always-high sellers compare the margin stream against one saved
        # cost; always-low sellers facing high competitors have no customers
        # to deviate over.
        for i, strategy in enumerate(profile):
            if strategy.kind != "always_high":
                continue
            sigma, cost = sellers[i]
            if not always_high_condition(cost, p, sigma):
                return DeviationCheck(False, f"seller {i} gains by delivering Low once")
        return DeviationCheck(True)
    if shapes == {"always_low"}:
        for i, (sigma, cost) in enumerate(sellers):
            if isinstance(policy, GrimTrigger):
                bound = sigma * p
            else:
                bound = always_low_bound(
                    policy, p, sigma, n_buyers, n_sellers,
                    threshold_variant=threshold_variant,
                )
            if cost < bound:
                return DeviationCheck(False, f"seller {i} gains by delivering High once")
        return DeviationCheck(True)
    if shapes == {"periodic"}:
        for i, strategy in enumerate(profile):
            sigma, cost = sellers[i]
            upper, lower = periodic_bounds(p, sigma, strategy.k, n_buyers)
            if cost >= upper:
                return DeviationCheck(
                    False, f"seller {i} gains by cutting a high round short"
                )
            if cost <= lower:
                return DeviationCheck(
                    False, f"seller {i} gains by upgrading the low round"
                )
        return DeviationCheck(True)  # unreachable: the bounds never leave room
    raise UnsupportedProfile(f"no closed form for profile shapes {sorted(shapes)}")


# -- simulation mode ---------------------------------------------------------

class _LagChain:
    """Exact per-buyer eligibility clock for the symmetric always-low market.

    State is the number of rounds since the buyer last bought from the focal
    seller: she is blocked for ``alpha`` rounds after a purchase and
    otherwise picks uniformly among her eligible sellers, which pins the
    probability of returning to the focal one at 1/(n_S - alpha).
    """

    def __init__(self, n_sellers: int, alpha: int):
        if alpha >= n_sellers:
            raise UnsupportedProfile("punishment span must leave an eligible seller")
        self.alpha = alpha
        self.q0 = Fraction(1, n_sellers - alpha)
        # distribution over states 1..alpha ("blocked") plus "free"
        self.blocked = [ZERO] * alpha
        self.free = ONE

    @classmethod
    def stationary(cls, n_sellers: int, alpha: int) -> "_LagChain":
        chain = cls(n_sellers, alpha)
        share = Fraction(1, n_sellers)
        chain.blocked = [share] * alpha
        chain.free = ONE - alpha * share
        return chain

    def condition_not_bought(self):
        """Advance one round given the buyer did not buy focal this round.

        Blocked states age unaffected (they could not have bought anyway);
        the free mass keeps only its non-buying share; everything is then
        renormalized by the probability of the observed event.
        """
        norm = ONE - self.q0 * self.free
        if norm <= ZERO:
            raise EquilibriumError("conditioning on an impossible event")
        freed = self.blocked[-1] if self.blocked else ZERO
        new_blocked = ([ZERO] + self.blocked[:-1]) if self.blocked else []
        new_free = self.free * (ONE - self.q0) + freed
        self.blocked = [b / norm for b in new_blocked]
        self.free = new_free / norm

    def step(self) -> Fraction:
        """Advance one round; returns the probability of buying focal now."""
        buy = self.q0 * self.free
        new_blocked = [buy] + self.blocked[:-1] if self.blocked else []
        freed = self.blocked[-1] if self.blocked else buy
        self.free = self.free - buy + freed
        if self.blocked:
            self.blocked = new_blocked
        return buy

    def force_bought(self):
        self.blocked = [ONE] + [ZERO] * (self.alpha - 1) if self.alpha else []
        self.free = ZERO if self.alpha else ONE


def _policy_alpha(policy) -> int:
    if isinstance(policy, TitForTat):
        return 1
    if isinstance(policy, Limited):
        return policy.alpha
    if isinstance(policy, GrimTrigger):
        return -1  # permanent
    if isinstance(policy, Threshold):
        return 0   # no per-buyer blacklists
    raise EquilibriumError(f"unknown policy {policy!r}")


def _simulate_always_high_gain(sigma, cost, p, horizon) -> Fraction:
    """Deviation gain for an always-high seller with one locked customer.

    Staying earns the margin every round, the customer never leaving; one
    low delivery earns the full price once, after which her perception of
    him sits strictly below the untouched competitors and he never sells
    again (under every policy: the blacklist only shortens the argument).
    """
    stay = ZERO
    power = ONE
    for _ in range(horizon):
        stay += power * (p - cost)
        power *= sigma
    deviate = p
    return deviate - stay


def _simulate_always_low_gain(sigma, cost, p, n_sellers, n_buyers, policy, horizon) -> Fraction:
    """Deviation gain for an always-low seller at the stationary class.

    Conditioned on serving exactly one buyer this round.  Staying: the
    price now, then the eligibility clocks grind out his expected share.
    Deviating: one high delivery now, after which his rating is the only
    positive one, so the whole market flocks to him every round his
    blacklists are clear, in a cycle as long as the punishment span.
    """
    alpha = _policy_alpha(policy)
    if alpha in (-1, 0):
        raise UnsupportedProfile(
            "simulation mode covers per-buyer punishment of bounded span here"
        )
    # Stay branch: exact expected customer masses from the lag chains.
    customer = _LagChain(n_sellers, alpha)
    customer.force_bought()
    others = _LagChain.stationary(n_sellers, alpha)
    others.condition_not_bought()
    stay = p  # the conditioned customer, this round
    power = sigma
    for _ in range(1, horizon):
        a_buy = customer.step()
        b_buy = others.step()
        stay += power * p * (a_buy + (n_buyers - 1) * b_buy)
        power *= sigma
    # Deviate branch: high now to the one customer, then full flocks every
    # (alpha + 1) rounds.
    deviate = p - cost
    power = sigma
    j = 1
    while j < horizon:
        if (j - 1) % (alpha + 1) == 0:
            deviate += power * p * n_buyers
        power *= sigma
        j += 1
    return deviate - stay


def _simulation_check(profile, p, sellers, policy, n_buyers, tol):
    shapes = _profile_shapes(profile)
    n_sellers = len(profile)
    if shapes == {"always_high"}:
        for i, (sigma, cost) in enumerate(sellers):
            horizon = truncation_horizon(sigma, p, n_buyers, tol)
            if _simulate_always_high_gain(sigma, cost, p, horizon) > ZERO:
                return DeviationCheck(False, f"seller {i} gains by delivering Low once")
        return DeviationCheck(True)
    if shapes == {"always_low"}:
        for i, (sigma, cost) in enumerate(sellers):
            horizon = truncation_horizon(sigma, p, n_buyers, tol)
            gain = _simulate_always_low_gain(
                sigma, cost, p, n_sellers, n_buyers, policy, horizon
            )
            if gain > ZERO:
                return DeviationCheck(False, f"seller {i} gains by delivering High once")
        return DeviationCheck(True)
    raise UnsupportedProfile(
        f"simulation mode supports uniform always-high/always-low profiles, "
        f"not {sorted(shapes)}"
    )
