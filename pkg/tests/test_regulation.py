"""Encrypted aggregation, monitoring, fees, and leakage corner cases."""

import itertools
import random
from fractions import Fraction as F

import pytest

from b2bmarket.market import RoundSummary
from b2bmarket.punishment import TitForTat
from b2bmarket.regulation import (
    BuyingPatternLeak,
    ConsistencyError,
    FeedbackLeak,
    FeeSchedule,
    KeyMismatchError,
    MonitorBinding,
    ProtocolSession,
    QuorumError,
    RegulationError,
    SoftwareEntity,
    aggregate_encrypted,
    consistency_check,
    dishonesty_fee,
    encode_feedback,
    encrypt,
    hom_abs,
    hom_add,
    hom_scale,
    keygen,
    leakage_flags,
    local_public_perception,
    monitor_cycle,
    public_perception_round,
    submit_feedback,
    threshold_decrypt,
)
from b2bmarket.market import oracle_public_perception
from b2bmarket.rng import StreamFamily


def streams(seed=1):
    return StreamFamily(seed)


def make_key(n=3, seed=1):
    return keygen([f"b{i}" for i in range(n)], streams(seed).stream("keygen"))


# -- key generation and decryption quorum --------------------------------------

def test_keygen_one_share_per_buyer_and_roundtrip():
    key = make_key(3)
    assert len(key.shares) == 3
    ct = encrypt(F(1, 2), key)
    assert threshold_decrypt(key.shares, [ct]) == [F(1, 2)]


def test_partial_share_sets_always_fail():
    key = make_key(3)
    ct = encrypt(F(1, 2), key)
    with pytest.raises(QuorumError):
        threshold_decrypt(key.shares[:2], [ct])
    with pytest.raises(QuorumError):
        threshold_decrypt([], [ct])


def test_foreign_shares_are_rejected():
    key_a = make_key(3, seed=1)
    key_b = make_key(3, seed=2)
    ct = encrypt(F(1, 2), key_a)
    with pytest.raises(KeyMismatchError):
        threshold_decrypt(key_b.shares, [ct])
    with pytest.raises(KeyMismatchError):
        threshold_decrypt(list(key_a.shares[:2]) + [key_b.shares[0]], [ct])


def test_keygen_needs_three_buyers():
    with pytest.raises(RegulationError):
        keygen(["b0", "b1"], streams().stream("keygen"))


def test_quorum_fuzz_proper_subsets_never_decrypt():
    rng = random.Random(99)
    key = make_key(5, seed=7)
    ct = encrypt(F(3, 7), key)
    for _ in range(300):
        size = rng.randint(1, 4)
        subset = rng.sample(key.shares, size)
        with pytest.raises(QuorumError):
            threshold_decrypt(subset, [ct])
    assert threshold_decrypt(list(key.shares), [ct]) == [F(3, 7)]


def test_equal_plaintexts_get_distinct_ciphertexts():
    key = make_key()
    a = encrypt(F(1), key)
    b = encrypt(F(1), key)
    assert a != b and a.nonce != b.nonce


# -- feedback encoding -----------------------------------------------------------

def test_encode_feedback_cases():
    assert encode_feedback((1, "High"), 3) == (0, 1, 0)
    assert encode_feedback((0, "Low"), 3) == (-1, 0, 0)
    assert encode_feedback(None, 3) == (0, 0, 0)
    with pytest.raises(RegulationError):
        encode_feedback((3, "High"), 3)
    with pytest.raises(RegulationError):
        encode_feedback((0, "Medium"), 3)


# -- consistency binding -----------------------------------------------------------

def test_consistent_copies_accepted():
    key = make_key()
    mpc, mon = submit_feedback("b0", "anon-1", (1, 0, 0), key, salt=42)
    assert consistency_check(mpc, mon)


def test_diverging_copies_rejected():
    key = make_key()
    mpc, mon = submit_feedback(
        "b0", "anon-1", (1, 0, 0), key, salt=42, monitor_vector=(-1, 0, 0)
    )
    assert not consistency_check(mpc, mon)


def test_tampered_commitment_rejected():
    key = make_key()
    mpc, mon = submit_feedback("b0", "anon-1", (1, 0, 0), key, salt=42)
    forged = type(mon)(mon.alias, mon.vector, mon.salt, "00" * 32)
    assert not consistency_check(mpc, forged)
    with pytest.raises(ConsistencyError):
        consistency_check(None, mon)


# -- homomorphic aggregation --------------------------------------------------------

def brute_force_iq(vectors, n_sellers):
    """Plaintext reference: per-seller high fraction and sale count."""
    out = []
    counts = []
    for s in range(n_sellers):
        column = [v[s] for v in vectors]
        high = sum(1 for v in column if v == 1)
        low = sum(1 for v in column if v == -1)
        counts.append(high + low)
        out.append(F(high, high + low) if high + low else None)
    return out, counts


def test_entrywise_split_identities_exhaustive():
    key = make_key()
    half = F(1, 2)
    for value in (-1, 0, 1):
        ct = encrypt(F(value), key)
        magnitude = hom_abs(ct)
        high = hom_scale(hom_add(ct, magnitude), half)
        low = hom_scale(hom_add(magnitude, hom_scale(ct, F(-1))), half)
        got = threshold_decrypt(key.shares, [high, low])
        assert got == [F(1) if value == 1 else F(0), F(1) if value == -1 else F(0)]


def test_aggregate_matches_plaintext_oracle():
    key = make_key(3)
    vectors = [(1, 0, 0), (-1, 0, 0), (0, 1, 0)]
    rows = [
        submit_feedback(f"b{i}", f"anon-{i}", v, key, salt=i)[0]
        for i, v in enumerate(vectors)
    ]
    aggregate = aggregate_encrypted(rows, 3)
    expected_iq, expected_counts = brute_force_iq(vectors, 3)
    assert expected_iq == [F(1, 2), F(1), None]
    got_counts = threshold_decrypt(key.shares, aggregate.sale_counts)
    assert got_counts == expected_counts
    ciphers = [ct for ct in aggregate.rated_high if ct is not None]
    values = iter(threshold_decrypt(key.shares, ciphers))
    got_iq = [next(values) if ct is not None else None for ct in aggregate.rated_high]
    assert got_iq == expected_iq


def test_aggregate_random_rounds_match_oracle():
    rng = random.Random(17)
    for trial in range(30):
        n_b = rng.randint(3, 6)
        n_s = rng.randint(3, 6)
        key = make_key(n_b, seed=trial + 10)
        vectors = []
        for i in range(n_b):
            vector = [0] * n_s
            if rng.random() < 0.85:
                vector[rng.randrange(n_s)] = rng.choice([-1, 1])
            vectors.append(tuple(vector))
        rows = [
            submit_feedback(f"b{i}", f"anon-{i}", v, key, salt=i)[0]
            for i, v in enumerate(vectors)
        ]
        aggregate = aggregate_encrypted(rows, n_s)
        expected_iq, expected_counts = brute_force_iq(vectors, n_s)
        assert threshold_decrypt(key.shares, aggregate.sale_counts) == expected_counts
        ciphers = [ct for ct in aggregate.rated_high if ct is not None]
        values = iter(threshold_decrypt(key.shares, ciphers))
        got = [next(values) if ct is not None else None for ct in aggregate.rated_high]
        assert got == expected_iq


def test_aggregate_unanimous_high_is_one():
    key = make_key(3)
    rows = [
        submit_feedback(f"b{i}", f"anon-{i}", (0, 1, 0), key, salt=i)[0]
        for i in range(3)
    ]
    aggregate = aggregate_encrypted(rows, 3)
    assert threshold_decrypt(key.shares, [aggregate.rated_high[1]]) == [F(1)]


def test_aggregate_rejects_mixed_keys_and_bad_width():
    key_a = make_key(3, seed=1)
    key_b = make_key(3, seed=2)
    row_a = submit_feedback("b0", "anon-0", (1, 0, 0), key_a, salt=1)[0]
    row_b = submit_feedback("b1", "anon-1", (0, 1, 0), key_b, salt=2)[0]
    with pytest.raises(KeyMismatchError):
        aggregate_encrypted([row_a, row_b], 3)
    with pytest.raises(RegulationError):
        aggregate_encrypted([row_a], 4)


# -- protocol round vs the trusted path -----------------------------------------------

def test_protocol_round_equals_oracle_path():
    n_s = 3
    fam = streams(23)
    se = SoftwareEntity(fam.stream("monitor"))
    session = ProtocolSession([f"b{i}" for i in range(3)], n_s, se, fam.stream("keygen"))
    vectors = {
        "b0": encode_feedback((0, "High"), n_s),
        "b1": encode_feedback((0, "Low"), n_s),
        "b2": encode_feedback((1, "High"), n_s),
    }
    delta_m = F(9, 10)
    ratings = public_perception_round(
        session, 1, vectors, delta_m, F(1, 2), [1] * n_s, [F(1, 2)] * n_s,
        fam.stream("salt"),
    )
    summary = RoundSummary(1, (1, 1, 0), (F(1, 2), F(1), None))
    assert ratings == oracle_public_perception([summary], delta_m, F(1, 2))


def test_protocol_consensus_fault_detected():
    n_s = 3
    fam = streams(29)
    se = SoftwareEntity(fam.stream("monitor"))
    session = ProtocolSession([f"b{i}" for i in range(3)], n_s, se, fam.stream("keygen"))
    session.submit_round(1, {"b0": (1, 0, 0)}, fam.stream("salt"))
    with pytest.raises(ConsistencyError, match="consensus failure"):
        session.compute_perception(
            F(9, 10), F(1, 2), [1] * n_s, [F(1, 2)] * n_s, faulty_buyer="b1"
        )


def test_inconsistent_submission_dropped_from_aggregation():
    n_s = 3
    fam = streams(31)
    se = SoftwareEntity(fam.stream("monitor"))
    session = ProtocolSession([f"b{i}" for i in range(3)], n_s, se, fam.stream("keygen"))
    vectors = {"b0": (1, 0, 0), "b1": (1, 0, 0), "b2": (0, -1, 0)}
    row = session.submit_round(
        1, vectors, fam.stream("salt"),
        monitor_vectors={"b1": (-1, 0, 0)},  # lies to the aggregation path
    )
    assert session.rejected == [(1, "b1")]
    assert row[0] == F(1)   # only b0's high vote for seller 0 counts
    assert row[1] == F(0)
    assert row[2] is None


def test_local_perception_no_sales_anchor():
    got = local_public_perception([[None, None]], F(9, 10), F(1, 2), [1, 1], [F(1, 2), F(2, 5)], 2)
    assert got == [F(1, 2), F(2, 5)]


# -- monitoring -------------------------------------------------------------------

def _binding(theta="0.5"):
    return MonitorBinding(
        monitor_id="m0", alias="anon-7", delta=F(4, 5), theta=F(theta),
        xi=F(1, 2), v_high=F(5), v_low=F(0), policy=TitForTat(),
    )


def test_monitor_accepts_consistent_behavior():
    binding = _binding()
    feedback = [(0, 1, 0)]                       # round 1: high from seller 1
    ratings = [[F(1, 2)] * 3, [F(1, 2), F(1), F(1, 2)]]
    prices = {s: F(2) for s in range(3)}
    # Seller 1 is now her unique best choice; she buys it again.
    report = monitor_cycle(binding, feedback, ratings, prices, observed_purchase=1)
    assert report is None


def test_monitor_flags_purchase_outside_prediction():
    binding = _binding()
    feedback = [(0, 1, 0)]
    ratings = [[F(1, 2)] * 3, [F(1, 2), F(1), F(1, 2)]]
    prices = {s: F(2) for s in range(3)}
    report = monitor_cycle(binding, feedback, ratings, prices, observed_purchase=2)
    assert report is not None
    assert report.predicted == {1}
    assert report.observed == 2
    assert report.alias == "anon-7"


def test_monitor_honours_blacklists_in_prediction():
    binding = _binding()
    # Round 1: low from seller 0 (perceived quality was positive), so the
    # buyer cannot buy seller 0 in round 2.
    feedback = [(-1, 0, 0)]
    ratings = [[F(1, 2)] * 3, [F(0), F(1, 2), F(1, 2)]]
    prices = {s: F(2) for s in range(3)}
    report = monitor_cycle(binding, feedback, ratings, prices, observed_purchase=0)
    assert report is not None
    assert 0 not in report.predicted


def test_se_resolves_aliases():
    se = SoftwareEntity(streams(3).stream("monitor"))
    alias = se.assign_alias("b2")
    assert se.assign_alias("b2") == alias
    assert se.resolve(alias) == "b2"
    with pytest.raises(RegulationError):
        se.resolve("anon-unknown")


# -- fees ---------------------------------------------------------------------------

def test_fee_closed_form():
    assert dishonesty_fee(FeeSchedule(F(1, 10), F(3))) == 30
    assert dishonesty_fee(FeeSchedule(F(1), F(3))) == 3


def test_fee_dominates_every_partial_sum():
    schedule = FeeSchedule(F(1, 10), F(3))
    fee = dishonesty_fee(schedule)
    ratio = 1 - schedule.nu
    for t in (1, 5, 50, 500):
        partial = schedule.u_max * (1 - ratio ** t) / (1 - ratio)
        assert fee > partial


def test_fee_schedule_validation():
    with pytest.raises(RegulationError):
        FeeSchedule(F(0), F(3))
    with pytest.raises(RegulationError):
        FeeSchedule(F(11, 10), F(3))


# -- leakage flags ---------------------------------------------------------------------

def test_two_seller_round_flags_buying_pattern():
    summary = RoundSummary(4, (1, 1, 0), (F(1, 2), F(1, 3), None))
    flags = leakage_flags(summary, [F(1, 2), F(1, 3), F(1, 2)])
    kinds = {type(f) for f in flags}
    assert BuyingPatternLeak in kinds
    pattern = next(f for f in flags if isinstance(f, BuyingPatternLeak))
    assert pattern.sellers == {0, 1}


def test_extreme_rating_flags_feedback_leak():
    summary = RoundSummary(4, (1, 1, 1), (F(1), F(1, 2), F(1, 3)))
    flags = leakage_flags(summary, [F(1), F(1, 2), F(1, 3)])
    leaks = [f for f in flags if isinstance(f, FeedbackLeak)]
    assert leaks == [FeedbackLeak(0, F(1))]


def test_clean_round_has_no_flags():
    summary = RoundSummary(4, (1, 1, 1), (F(1, 2), F(1, 2), F(1, 2)))
    assert leakage_flags(summary, [F(1, 2), F(2, 3), F(3, 4)]) == []


def test_leakage_flags_exhaustive_single_round():
    # n_B = n_S = 3: every assignment of buyers to sellers, every feedback
    # sign pattern; flags must match the first-principles predicate exactly.
    for assignment in itertools.product(range(3), repeat=3):
        for signs in itertools.product((1, -1), repeat=3):
            vectors = []
            for buyer in range(3):
                vector = [0, 0, 0]
                vector[assignment[buyer]] = signs[buyer]
                vectors.append(vector)
            iq, counts = brute_force_iq(vectors, 3)
            sold = tuple(1 if c else 0 for c in counts)
            summary = RoundSummary(1, sold, tuple(iq))
            ratings = [iq[s] if sold[s] else F(1, 2) for s in range(3)]
            flags = leakage_flags(summary, ratings)
            selling = {s for s in range(3) if sold[s]}
            expect_pattern = len(selling) in (1, 2)
            expect_feedback = {s for s in selling if ratings[s] in (F(0), F(1))}
            assert any(isinstance(f, BuyingPatternLeak) for f in flags) == expect_pattern
            assert {f.seller for f in flags if isinstance(f, FeedbackLeak)} == expect_feedback


def test_protocol_all_zero_round_propagates_anchors():
    n_s = 3
    fam = streams(37)
    se = SoftwareEntity(fam.stream("monitor"))
    session = ProtocolSession([f"b{i}" for i in range(3)], n_s, se, fam.stream("keygen"))
    zero = {f"b{i}": (0, 0, 0) for i in range(3)}
    anchors = [F(1, 2), F(2, 5), F(7, 10)]
    ratings = public_perception_round(
        session, 1, zero, F(9, 10), F(1, 2), [1] * n_s, anchors, fam.stream("salt")
    )
    assert ratings == anchors


def test_transcript_grows_and_steps_are_ordered():
    n_s = 3
    fam = streams(41)
    se = SoftwareEntity(fam.stream("monitor"))
    session = ProtocolSession([f"b{i}" for i in range(3)], n_s, se, fam.stream("keygen"))
    for t in (1, 2):
        vectors = {"b0": encode_feedback((0, "High"), n_s)}
        public_perception_round(
            session, t, vectors, F(9, 10), F(1, 2), [1] * n_s, [F(1, 2)] * n_s,
            fam.stream("salt"),
        )
    steps = [e.step for e in session.transcript]
    assert steps == sorted(steps) and len(set(steps)) == len(steps)
    assert len(session.ledger.steps) == 2  # one recorded computation per round
