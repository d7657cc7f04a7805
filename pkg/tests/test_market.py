"""Market model tests: rating formulas, selection, and the round loop."""

import random
from fractions import Fraction as F

import pytest

from b2bmarket.market import (
    BuyerState,
    AlwaysHigh,
    AlwaysLow,
    MarketConfig,
    MarketError,
    Periodic,
    RoundSummary,
    Scripted,
    SellerState,
    MarketState,
    expected_utility,
    oracle_public_perception,
    personal_history,
    personal_perception,
    select_seller,
    stage_payoffs,
)
from b2bmarket.pricing import Homogeneous
from b2bmarket.punishment import TitForTat
from b2bmarket.rng import StreamFamily


def brute_force_rating(iq, it, delta, anchor):
    """Direct per-definition evaluation: explicit powers, no shortcuts."""
    t = len(it) + 1
    num = F(0)
    den = F(0)
    untouched = F(1)
    for i in range(1, t):
        weight = delta ** (t - i - 1)
        num += weight * (iq[i - 1] if it[i - 1] else 0)
        den += weight * it[i - 1]
        untouched *= 1 - it[i - 1]
    num += anchor * untouched
    den += untouched
    return num / den


# -- personal history --------------------------------------------------------

def test_personal_history_never_transacted_returns_xi():
    q_series = [F(1, 2), F(1, 2), F(1, 2)]
    assert personal_history([0, 0], [0, 0], F(4, 5), F(1, 2), q_series) == F(1, 2)


def test_personal_history_single_high_round():
    # delta=0.8, bought high in round 1 only, evaluated at t=3: (0.8*1)/(0.8*1)
    q_series = [F(1, 2)] * 3
    assert personal_history([1, 0], [1, 0], F(4, 5), F(1, 2), q_series) == 1


def test_personal_history_xi_bar_switches_permanently():
    # xi=0.5, the public rating hit 0.9 in round 2, sits at 0.7 in round 3
    q_series = [F(1, 2), F(9, 10), F(7, 10)]
    assert personal_history([0, 0], [0, 0], F(4, 5), F(1, 2), q_series) == F(7, 10)


def test_personal_history_matches_brute_force():
    rng = random.Random(7)
    for _ in range(200):
        t = rng.randint(2, 12)
        it = [rng.randint(0, 1) for _ in range(t - 1)]
        iq = [bit and rng.randint(0, 1) for bit in it]
        delta = F(rng.randint(56, 99), 100)
        xi = F(rng.randint(1, 9), 10)
        q_series = [F(rng.randint(0, 10), 10) for _ in range(t)]
        got = personal_history(iq, it, delta, xi, q_series)
        if any(it):
            assert got == brute_force_rating(iq, it, delta, xi)
        assert 0 <= got <= 1


def test_personal_history_rejects_ragged_history():
    with pytest.raises(MarketError):
        personal_history([1], [1, 0], F(4, 5), F(1, 2), [F(1, 2)] * 3)
    with pytest.raises(MarketError):
        personal_history([1], [1], F(4, 5), F(1, 2), [F(1, 2)] * 3)


# -- perception and utilities -------------------------------------------------

def test_personal_perception_weights():
    assert personal_perception(F(3, 10), F(9, 10), F(1)) == F(3, 10)
    assert personal_perception(F(3, 10), F(9, 10), F(0)) == F(9, 10)
    assert personal_perception(F(1, 5), F(3, 5), F(1, 4)) == F(1, 2)


def test_expected_utility_values():
    assert expected_utility(F(1), F(5), F(0), F(2)) == 3
    assert expected_utility(F(0), F(5), F(0), F(2)) == -2
    assert expected_utility(F(1, 2), F(5), F(1), F(2)) == 1


def test_stage_payoffs_rows():
    assert stage_payoffs("High", F(2), F(1), F(5), F(0)) == (F(3), F(1))
    assert stage_payoffs("Low", F(2), F(1), F(5), F(0)) == (F(-2), F(2))
    buyer_u, seller_u = stage_payoffs("High", F(1), F(1), F(5), F(0))
    assert seller_u == 0


# -- seller selection ---------------------------------------------------------

def _stream():
    return StreamFamily(5).stream("select")


def test_select_seller_argmax():
    perceptions = {0: F(4, 5), 1: F(1, 2)}
    prices = {0: F(2), 1: F(2)}
    chosen = select_seller(perceptions, prices, F(5), F(0), set(), {}, _stream())
    assert chosen == 0  # utilities 2 vs 0.5


def test_select_seller_all_excluded_returns_none():
    chosen = select_seller({0: F(1, 2)}, {0: F(2)}, F(5), F(0), {0}, {}, _stream())
    assert chosen is None


def test_select_seller_tie_prefers_recent_high():
    perceptions = {0: F(1, 2), 1: F(1, 2), 2: F(1, 2)}
    prices = {0: F(2), 1: F(2), 2: F(2)}
    chosen = select_seller(
        perceptions, prices, F(5), F(0), set(), {1: 4, 2: 2}, _stream()
    )
    assert chosen == 1


def test_select_seller_full_tie_is_uniformly_random():
    perceptions = {s: F(1, 2) for s in range(3)}
    prices = {s: F(2) for s in range(3)}
    stream = _stream()
    seen = {
        select_seller(perceptions, prices, F(5), F(0), set(), {}, stream)
        for _ in range(60)
    }
    assert seen == {0, 1, 2}


def test_select_seller_affine_invariance():
    # A common positive affine map of all utilities keeps the argmax set.
    rng = random.Random(3)
    for _ in range(50):
        n = rng.randint(3, 6)
        perceptions = {s: F(rng.randint(0, 10), 10) for s in range(n)}
        prices = {s: F(rng.randint(1, 4)) for s in range(n)}
        base = {
            s: expected_utility(perceptions[s], F(5), F(0), prices[s])
            for s in range(n)
        }
        a, b = F(rng.randint(1, 5)), F(rng.randint(-3, 3))
        mapped = {s: a * u + b for s, u in base.items()}
        best = max(base.values())
        best_mapped = max(mapped.values())
        assert {s for s, u in base.items() if u == best} == \
               {s for s, u in mapped.items() if u == best_mapped}


# -- market-wide rating -------------------------------------------------------

def test_oracle_rating_no_sales_is_xi():
    s1 = RoundSummary(1, (0,), (None,))
    assert oracle_public_perception([s1], F(9, 10), F(1, 2)) == [F(1, 2)]
    assert oracle_public_perception([], F(9, 10), F(1, 2), n_sellers=2) == [F(1, 2)] * 2


def test_oracle_rating_hand_value():
    s1 = RoundSummary(1, (1,), (F(1),))
    s2 = RoundSummary(2, (1,), (F(1, 2),))
    assert oracle_public_perception([s1, s2], F(9, 10), F(1, 2)) == [F(14, 19)]


def test_oracle_rating_all_high_is_one():
    summaries = [RoundSummary(t, (1,), (F(1),)) for t in range(1, 8)]
    assert oracle_public_perception(summaries, F(7, 10), F(1, 2)) == [F(1)]


def test_oracle_rating_matches_brute_force():
    rng = random.Random(11)
    for _ in range(100):
        t = rng.randint(2, 15)
        summaries = []
        for i in range(1, t):
            sold = rng.randint(0, 1)
            iq = F(rng.randint(0, 4), 4) if sold else None
            summaries.append(RoundSummary(i, (sold,), (iq,)))
        delta = F(rng.randint(61, 99), 100)
        xi = F(1, 2)
        got = oracle_public_perception(summaries, delta, xi)[0]
        iq = [s.rated_high[0] if s.sold[0] else 0 for s in summaries]
        it = [s.sold[0] for s in summaries]
        assert got == brute_force_rating(iq, it, delta, xi)


def test_oracle_rating_rejects_gaps():
    s1 = RoundSummary(1, (1,), (F(1),))
    s3 = RoundSummary(3, (1,), (F(1),))
    with pytest.raises(MarketError):
        oracle_public_perception([s1, s3], F(9, 10), F(1, 2))


def test_no_sale_round_shifts_exponents_only():
    # Appending a no-sale round must re-weight old data by one extra power.
    rng = random.Random(2)
    for _ in range(40):
        t = rng.randint(2, 10)
        summaries = [
            RoundSummary(i, (1,), (F(rng.randint(0, 3), 3),))
            for i in range(1, t)
        ]
        delta = F(rng.randint(61, 97), 100)
        extended = summaries + [RoundSummary(t, (0,), (None,))]
        before = oracle_public_perception(summaries, delta, F(1, 2))[0]
        after = oracle_public_perception(extended, delta, F(1, 2))[0]
        assert after == before  # ratio is invariant under a common power shift
        iq = [s.rated_high[0] if s.sold[0] else 0 for s in extended]
        it = [s.sold[0] for s in extended]
        assert after == brute_force_rating(iq, it, delta, F(1, 2))


# -- strategies ---------------------------------------------------------------

def test_periodic_strategy_cycle():
    strat = Periodic(2)
    assert [strat.quality(t) for t in range(1, 8)] == [
        "High", "High", "Low", "High", "High", "Low", "High",
    ]


def test_scripted_strategy_bounds():
    strat = Scripted(["High", "Low"])
    assert strat.quality(2) == "Low"
    with pytest.raises(MarketError):
        strat.quality(3)


# -- the round loop -----------------------------------------------------------

def _small_state(strategies, seed=9, n_buyers=3, policy=None, theta="0.5"):
    config = MarketConfig(
        n_buyers=n_buyers, n_sellers=len(strategies), xi=F(1, 2), tau=F(11, 20),
        tau_bar=F(3, 5), v_high=F(5), v_low=F(0), rounds=30, seed=seed,
    )
    buyers = [BuyerState(delta=F(4, 5), theta=F(theta)) for _ in range(n_buyers)]
    sellers = [SellerState(sigma=F(7, 10), cost=F(1), strategy=s) for s in strategies]
    return MarketState(config, buyers, sellers, Homogeneous(F(2)), policy or TitForTat())


def test_all_high_round_rates_every_selling_seller_high():
    state = _small_state([AlwaysHigh(), AlwaysHigh(), AlwaysHigh()])
    outcome = state.run_round()
    for s in outcome.summary.sellers_with_sales:
        assert outcome.summary.rated_high[s] == 1


def test_seller_without_buyers_has_no_rating_weight():
    state = _small_state([AlwaysHigh(), AlwaysHigh(), AlwaysHigh(), AlwaysHigh()], n_buyers=3)
    outcome = state.run_round()
    idle = set(range(4)) - outcome.summary.sellers_with_sales
    assert idle  # 3 buyers cannot cover 4 sellers
    state.run_round()
    for s in idle:
        assert state.perception.ratings[-1][s] == F(1, 2)  # still at xi


def test_rerun_with_same_seed_is_identical():
    a = _small_state([AlwaysHigh(), Periodic(2), AlwaysLow()], seed=21)
    b = _small_state([AlwaysHigh(), Periodic(2), AlwaysLow()], seed=21)
    for _ in range(12):
        oa = a.run_round()
        ob = b.run_round()
        assert oa.ratings == ob.ratings
        assert oa.purchases == ob.purchases
        assert oa.summary == ob.summary


def test_round_one_choices_are_random_across_seeds():
    first = set()
    for seed in range(12):
        state = _small_state([AlwaysHigh(), AlwaysHigh(), AlwaysHigh()], seed=seed)
        outcome = state.run_round()
        first.add(tuple(p.seller for p in outcome.purchases))
    assert len(first) > 1


def test_perceptions_stay_in_unit_interval_on_random_runs():
    rng = random.Random(13)
    for trial in range(6):
        n_b = rng.choice([3, 4])
        n_s = rng.choice([3, 4])
        strategies = [
            rng.choice([AlwaysHigh(), AlwaysLow(), Periodic(rng.randint(1, 3))])
            for _ in range(n_s)
        ]
        state = _small_state(strategies, seed=trial, n_buyers=n_b)
        for _ in range(20):
            outcome = state.run_round()
            for s in range(n_s):
                assert 0 <= outcome.ratings[s] <= 1
                for b in range(n_b):
                    h = state.buyer_history(b, s)
                    assert 0 <= h <= 1
                    q = personal_perception(h, outcome.ratings[s], state.buyers[b].theta)
                    assert 0 <= q <= 1


def test_theta_zero_buyers_share_one_perception_vector():
    state = _small_state([AlwaysHigh(), Periodic(2), AlwaysLow()], theta="0", seed=4)
    for _ in range(10):
        outcome = state.run_round()
        vectors = []
        for b in range(3):
            vec = tuple(
                personal_perception(
                    state.buyer_history(b, s), outcome.ratings[s], F(0)
                )
                for s in range(3)
            )
            vectors.append(vec)
        assert len(set(vectors)) == 1


def test_incremental_history_matches_scratch_formula():
    # The engine's running ratio must equal the per-definition recomputation.
    state = _small_state([AlwaysHigh(), Periodic(2), AlwaysLow()], seed=17)
    for _ in range(15):
        state.run_round()
    for b in range(3):
        buyer = state.buyers[b]
        for s in range(3):
            if any(buyer.it_bits[s]):
                expected = brute_force_rating(
                    buyer.iq_bits[s], buyer.it_bits[s], buyer.delta, F(1, 2)
                )
                assert state.buyer_history(b, s) == expected


def test_config_rejects_tiny_markets():
    with pytest.raises(MarketError, match="strictly greater than 2"):
        MarketConfig(2, 3, F(1, 2), F(11, 20), F(3, 5), F(5), F(0), 10, 1)
    with pytest.raises(MarketError, match="strictly greater than 2"):
        MarketConfig(3, 2, F(1, 2), F(11, 20), F(3, 5), F(5), F(0), 10, 1)
