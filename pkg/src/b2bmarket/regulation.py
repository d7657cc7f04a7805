"""Privacy layer: encrypted rating aggregation and honesty monitoring.

Two sub-protocols run among the buyers at the end of every round.

The rating protocol keeps individual feedback unreadable.  Buyers jointly
generate a key whose decryptions need every secret share; each buyer encrypts
a per-seller feedback vector over {-1, 0, +1} (at most one nonzero entry, for
her one purchase); the vectors are stacked into a matrix F which is split
homomorphically into its positive and negative parts via (F + |F|)/2 and
(|F| - F)/2, column-summed, and reduced to one encrypted high-rated fraction
per selling seller.  Only those fractions are decrypted, jointly; every buyer
then recomputes the published rating vector locally and the copies are
checked for consensus.

The monitoring protocol discourages lying without learning who is lying
about whom.  A software entity (SE) gives each buyer an alias; her monitor
sees feedback only under that alias, together with the buyer's registered
taste parameters.  Because honest feedback equals true experience, the
monitor can recompute the buyer's perception and predict the set of sellers
she could rationally pick next; a purchase outside that set is reported to
the SE by alias, and the SE, which alone can map aliases back, names the
buyer.  A detected lie costs a fee equal to the full geometric sum of the
largest per-round utility, so lying never pays.

Real lattice-based threshold encryption and zero-knowledge proofs are out of
scope here: ciphertexts are opaque handles into a sealed table, the evaluator
supports the add/scale/abs/divide circuit pieces the protocol needs, and the
proof that the aggregation input matches the monitoring input is replaced by
hash-commitment equality.  What this layer is built to test is protocol
structure, data flow, and leakage discipline, not cryptography.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from fractions import Fraction

from .framework import MessageLedger
from .market import personal_history, personal_perception, expected_utility
from .numeric import ONE, ZERO, rat_str


class RegulationError(Exception):
    pass


class QuorumError(RegulationError):
    """Decryption attempted without the complete share set."""


class KeyMismatchError(RegulationError):
    """Ciphertexts or shares from different key generations were mixed."""


class ConsistencyError(RegulationError):
    pass


# --------------------------------------------------------------------------
# Mock threshold homomorphic encryption
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KeyShare:
    key_id: str
    index: int
    secret: int


@dataclass(frozen=True)
class KeyMaterial:
    key_id: str
    joint_public_key: str
    shares: tuple[KeyShare, ...]


@dataclass(frozen=True)
class Ciphertext:
    """Opaque handle; the hidden value lives in the sealed vault table."""

    key_id: str
    nonce: int

    def __repr__(self):
        return f"Ciphertext(key={self.key_id[:8]}, nonce={self.nonce})"


class _Vault:
    """Sealed plaintext table for one joint key."""

    def __init__(self, key_id: str, share_fingerprint: frozenset[tuple[int, int]]):
        self.key_id = key_id
        self.share_fingerprint = share_fingerprint
        self._table: dict[int, Fraction] = {}
        self._next_nonce = itertools.count()

    def seal(self, value: Fraction) -> Ciphertext:
        nonce = next(self._next_nonce)
        self._table[nonce] = Fraction(value)
        return Ciphertext(self.key_id, nonce)

    def peek(self, ct: Ciphertext) -> Fraction:
        # Internal evaluator access only; the public surface is the
        # homomorphic ops plus full-quorum decryption.
        if ct.key_id != self.key_id:
            raise KeyMismatchError("ciphertext sealed under a different key")
        return self._table[ct.nonce]


_VAULTS: dict[str, _Vault] = {}


def _vault_for(key_id: str) -> _Vault:
    try:
        return _VAULTS[key_id]
    except KeyError:
        raise KeyMismatchError(f"unknown key {key_id!r}") from None


def keygen(buyer_ids: list[str], stream) -> KeyMaterial:
    """Joint key generation: one secret share per buyer, all required."""
    if len(buyer_ids) < 3:
        raise RegulationError("joint key generation needs at least 3 buyers")
    key_id = hashlib.sha256(
        b"joint-key" + b"".join(stream.u64().to_bytes(8, "big") for _ in range(4))
    ).hexdigest()
    shares = tuple(
        KeyShare(key_id, i, stream.u64()) for i, _ in enumerate(buyer_ids)
    )
    fingerprint = frozenset((s.index, s.secret) for s in shares)
    _VAULTS[key_id] = _Vault(key_id, fingerprint)
    return KeyMaterial(key_id, "pk*" + key_id[:16], shares)


def encrypt(value: Fraction, key: KeyMaterial) -> Ciphertext:
    return _vault_for(key.key_id).seal(value)


def hom_add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    vault = _vault_for(a.key_id)
    return vault.seal(vault.peek(a) + vault.peek(b))


def hom_scale(a: Ciphertext, scalar: Fraction) -> Ciphertext:
    vault = _vault_for(a.key_id)
    return vault.seal(vault.peek(a) * scalar)


def hom_abs(a: Ciphertext) -> Ciphertext:
    vault = _vault_for(a.key_id)
    return vault.seal(abs(vault.peek(a)))


def hom_div(num: Ciphertext, den: Ciphertext) -> Ciphertext | None:
    """Encrypted ratio; None marks a zero denominator (a no-sale column)."""
    vault = _vault_for(num.key_id)
    d = vault.peek(den)
    if d == 0:
        return None
    return vault.seal(vault.peek(num) / d)


def threshold_decrypt(shares, ciphertexts: list[Ciphertext]) -> list[Fraction]:
    """Joint decryption.  Anything short of the full share set is refused.

    A partial or foreign share set raises before any plaintext is touched,
    so no interface path reveals a value without full cooperation.
    """
    shares = list(shares)
    if not shares:
        raise QuorumError("no shares presented")
    key_ids = {s.key_id for s in shares}
    if len(key_ids) != 1:
        raise KeyMismatchError("shares from different key generations")
    vault = _vault_for(key_ids.pop())
    for ct in ciphertexts:
        if ct.key_id != vault.key_id:
            raise KeyMismatchError("ciphertext does not match the share set")
    presented = frozenset((s.index, s.secret) for s in shares)
    if presented != vault.share_fingerprint:
        if presented < vault.share_fingerprint:
            raise QuorumError(
                f"{len(presented)} of {len(vault.share_fingerprint)} shares presented"
            )
        raise KeyMismatchError("share set does not match this key")
    return [vault.peek(ct) for ct in ciphertexts]


# --------------------------------------------------------------------------
# Feedback encoding and the commitment binding the two submissions
# --------------------------------------------------------------------------

def encode_feedback(purchase: tuple[int, str] | None, n_sellers: int) -> tuple[int, ...]:
    """Per-seller feedback vector: +1 high, -1 low, 0 everywhere else."""
    vector = [0] * n_sellers
    if purchase is not None:
        seller, quality = purchase
        if not 0 <= seller < n_sellers:
            raise RegulationError(f"seller index {seller} out of range")
        if quality == "High":
            vector[seller] = 1
        elif quality == "Low":
            vector[seller] = -1
        else:
            raise RegulationError(f"quality must be High or Low, got {quality!r}")
    return tuple(vector)


def validate_feedback_vector(vector) -> tuple[int, ...]:
    vector = tuple(int(v) for v in vector)
    if any(v not in (-1, 0, 1) for v in vector):
        raise RegulationError("feedback entries must lie in {-1, 0, 1}")
    if sum(1 for v in vector if v) > 1:
        raise RegulationError("at most one purchase per buyer per round")
    return vector


def commit_vector(vector, salt: int) -> str:
    payload = ",".join(str(v) for v in vector)
    return hashlib.sha256(f"{salt}|{payload}".encode()).hexdigest()


@dataclass(frozen=True)
class EncryptedSubmission:
    """Feedback for the aggregation path: cells sealed, vector committed."""

    buyer: str
    cells: tuple[Ciphertext, ...]
    commitment: str


@dataclass(frozen=True)
class MonitorSubmission:
    """The same feedback as the monitor receives it (decrypted view)."""

    alias: str
    vector: tuple[int, ...]
    salt: int
    commitment: str


def submit_feedback(
    buyer: str,
    alias: str,
    vector,
    key: KeyMaterial,
    salt: int,
    monitor_vector=None,
) -> tuple[EncryptedSubmission, MonitorSubmission]:
    """Build the two copies a buyer sends each round.

    ``monitor_vector`` lets tests model a dishonest buyer who tells her
    monitor something else; each copy is committed over its own content, so
    the copies can only check out together when they agree.
    """
    vector = validate_feedback_vector(vector)
    cells = tuple(encrypt(Fraction(v), key) for v in vector)
    mpc = EncryptedSubmission(buyer, cells, commit_vector(vector, salt))
    side = validate_feedback_vector(monitor_vector) if monitor_vector is not None else vector
    monitor = MonitorSubmission(alias, side, salt, commit_vector(side, salt))
    return mpc, monitor


def consistency_check(mpc_copy: EncryptedSubmission, monitor_copy: MonitorSubmission) -> bool:
    """The proof stand-in: both copies must commit to the same vector.

    Validators recompute the monitor copy's commitment from its opening and
    compare it with the commitment bound to the encrypted copy.
    """
    if mpc_copy is None or monitor_copy is None:
        raise ConsistencyError("both submissions are required")
    recomputed = commit_vector(monitor_copy.vector, monitor_copy.salt)
    return recomputed == monitor_copy.commitment == mpc_copy.commitment


# --------------------------------------------------------------------------
# Encrypted aggregation
# --------------------------------------------------------------------------

@dataclass
class EncryptedAggregate:
    rated_high: list[Ciphertext | None]   # per seller; None marks no sale
    sale_counts: list[Ciphertext]


def aggregate_encrypted(rows: list[EncryptedSubmission], n_sellers: int) -> EncryptedAggregate:
    """Fold the feedback matrix into per-seller encrypted rating fractions.

    Entrywise, the matrix splits into highs (F + |F|)/2 and lows
    (|F| - F)/2; the column sums of those give each seller's high and low
    counts, their sum his sale count, and the ratio the fraction of his
    sales rated high, still encrypted.
    """
    if not rows:
        raise RegulationError("no submissions to aggregate")
    key_ids = {ct.key_id for row in rows for ct in row.cells}
    if len(key_ids) != 1:
        raise KeyMismatchError("submissions under different keys")
    if any(len(row.cells) != n_sellers for row in rows):
        raise RegulationError("submission width does not match the seller count")
    half = Fraction(1, 2)
    minus_one = Fraction(-1)
    rated = []
    counts = []
    for s in range(n_sellers):
        high_sum = None
        low_sum = None
        for row in rows:
            cell = row.cells[s]
            magnitude = hom_abs(cell)
            high = hom_scale(hom_add(cell, magnitude), half)
            low = hom_scale(hom_add(magnitude, hom_scale(cell, minus_one)), half)
            high_sum = high if high_sum is None else hom_add(high_sum, high)
            low_sum = low if low_sum is None else hom_add(low_sum, low)
        total = hom_add(high_sum, low_sum)
        rated.append(hom_div(high_sum, total))
        counts.append(total)
    return EncryptedAggregate(rated, counts)


# --------------------------------------------------------------------------
# Local rating computation (the buyers' copy of the oracle formula)
# --------------------------------------------------------------------------

def local_public_perception(
    iq_history: list[list[Fraction | None]],
    delta_m: Fraction,
    xi: Fraction,
    epoch_starts: list[int],
    anchors: list[Fraction],
    n_sellers: int,
) -> list[Fraction]:
    """What each buyer computes after decryption, one Horner pass per seller.

    ``iq_history[i][s]`` is the decrypted high-rated fraction of seller s in
    round i+1, None when he made no sale (which round those are is public).
    Kept arithmetically independent of the trusted-path evaluator so that
    the two sides of the equality audit do not share a code path.
    """
    t = len(iq_history) + 1
    out = []
    for s in range(n_sellers):
        start = epoch_starts[s]
        num = ZERO
        den = ZERO
        sold_ever = False
        for i in range(start - 1, t - 1):
            iq = iq_history[i][s]
            num = num * delta_m
            den = den * delta_m
            if iq is not None:
                sold_ever = True
                num += iq
                den += ONE
        out.append(num / den if sold_ever else anchors[s])
    return out


# --------------------------------------------------------------------------
# Software entity, monitors, fees
# --------------------------------------------------------------------------

class SoftwareEntity:
    """Honest coordinator: alias map, discount draws, buyer-monitor relay."""

    def __init__(self, stream):
        self._stream = stream
        self._alias_of: dict[str, str] = {}
        self._real_of: dict[str, str] = {}

    def assign_alias(self, buyer_id: str) -> str:
        if buyer_id in self._alias_of:
            return self._alias_of[buyer_id]
        alias = f"anon-{self._stream.u64():016x}"
        self._alias_of[buyer_id] = alias
        self._real_of[alias] = buyer_id
        return alias

    def resolve(self, alias: str) -> str:
        try:
            return self._real_of[alias]
        except KeyError:
            raise RegulationError(f"unregistered alias {alias!r}") from None


@dataclass
class MonitorBinding:
    """One monitor's knowledge: an alias and pseudonymous taste parameters.

    The buyer registers delta and theta under her alias at setup; prediction
    is impossible without them, and the alias keeps it pseudonymous.
    """

    monitor_id: str
    alias: str
    delta: Fraction
    theta: Fraction
    xi: Fraction
    v_high: Fraction
    v_low: Fraction
    policy: object      # shared punishment policy, public knowledge


@dataclass(frozen=True)
class DishonestyReport:
    alias: str
    t: int
    predicted: frozenset[int]
    observed: int | None


def monitor_cycle(
    binding: MonitorBinding,
    feedback_history: list[tuple[int, ...]],
    rating_history: list[list[Fraction]],
    prices: dict[int, Fraction],
    observed_purchase: int | None,
    isolated=frozenset(),
) -> DishonestyReport | None:
    """Predict the buyer's round-t seller set and flag a mismatch.

    The feedback history (rounds 1..t-1) is taken as the buyer's true
    experience; from it the monitor rebuilds her personal histories, her
    blacklists under the shared policy, and her expected utilities for
    round t = len(rating_history).  Since real tie-breaking is random, only
    a purchase outside the whole argmax set is flagged.
    """
    from . import punishment as punishment_mod

    t = len(rating_history)
    if len(feedback_history) != t - 1:
        raise RegulationError("feedback history must cover rounds 1..t-1")
    n_sellers = len(rating_history[0]) if rating_history else 0
    blacklists = punishment_mod.BlacklistState()
    # Replay the feedback to rebuild blacklists; perception history is
    # recomputed per round because the punishment rule keys on it.
    for i, vector in enumerate(feedback_history, start=1):
        for s, value in enumerate(vector):
            if value == 0:
                continue
            quality = "High" if value > 0 else "Low"
            h = personal_history(
                [1 if fb[s] > 0 else 0 for fb in feedback_history[: i - 1]],
                [1 if fb[s] != 0 else 0 for fb in feedback_history[: i - 1]],
                binding.delta, binding.xi,
                [row[s] for row in rating_history[:i]],
            )
            q = personal_perception(h, rating_history[i - 1][s], binding.theta)
            punishment_mod.apply_feedback(
                binding.policy, 0, s, quality, q, blacklists, i
            )
    utilities = {}
    for s in range(n_sellers):
        if s in isolated or blacklists.is_blacklisted(0, s, t):
            continue
        h = personal_history(
            [1 if fb[s] > 0 else 0 for fb in feedback_history],
            [1 if fb[s] != 0 else 0 for fb in feedback_history],
            binding.delta, binding.xi,
            [row[s] for row in rating_history],
        )
        q = personal_perception(h, rating_history[-1][s], binding.theta)
        utilities[s] = expected_utility(q, binding.v_high, binding.v_low, prices[s])
    if not utilities:
        predicted: frozenset[int] = frozenset()
    else:
        best = max(utilities.values())
        predicted = frozenset(s for s, u in utilities.items() if u == best)
    if observed_purchase is None and not predicted:
        return None
    if observed_purchase in predicted:
        return None
    return DishonestyReport(binding.alias, t, predicted, observed_purchase)


@dataclass(frozen=True)
class FeeSchedule:
    nu: Fraction
    u_max: Fraction

    def __post_init__(self):
        if not ZERO < self.nu <= ONE:
            raise RegulationError("nu must sit in (0, 1]")


def dishonesty_fee(schedule: FeeSchedule) -> Fraction:
    """Full geometric sum: first term u_max, ratio 1 - nu."""
    return schedule.u_max / schedule.nu


# --------------------------------------------------------------------------
# Leakage corner cases
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BuyingPatternLeak:
    sellers: frozenset[int]

    def __str__(self):
        return f"buying-pattern leak: only sellers {sorted(self.sellers)} sold"


@dataclass(frozen=True)
class FeedbackLeak:
    seller: int
    rating: Fraction

    def __str__(self):
        return f"feedback leak: seller {self.seller} rating is {rat_str(self.rating)}"


def leakage_flags(summary, ratings: list[Fraction]) -> list:
    """The unavoidable corner cases where a round's privacy degrades.

    With only one or two sellers selling, those sellers can work out who
    bought from whom.  A selling seller whose published rating is exactly 0
    or 1 learns that all his feedback pointed one way.
    """
    flags = []
    sellers = summary.sellers_with_sales
    if len(sellers) in (1, 2):
        flags.append(BuyingPatternLeak(frozenset(sellers)))
    for s in sorted(sellers):
        if ratings[s] == ZERO or ratings[s] == ONE:
            flags.append(FeedbackLeak(s, ratings[s]))
    return flags


# --------------------------------------------------------------------------
# The round protocol, end to end
# --------------------------------------------------------------------------

@dataclass
class RoundTranscriptEntry:
    step: int
    sender: str
    receivers: tuple[str, ...]
    kind: str
    payload_digest: str
    public: dict | None = None


def _digest(payload) -> str:
    return hashlib.sha256(repr(payload).encode()).hexdigest()


class ProtocolSession:
    """State of the rating protocol across rounds for one market."""

    def __init__(self, buyer_ids: list[str], n_sellers: int, se: SoftwareEntity, keygen_stream):
        self.buyer_ids = list(buyer_ids)
        self.n_sellers = n_sellers
        self.se = se
        self.key = keygen(self.buyer_ids, keygen_stream)
        self.aliases = {b: se.assign_alias(b) for b in self.buyer_ids}
        self.iq_history: list[list[Fraction | None]] = []
        self.monitor_inbox: dict[str, list[MonitorSubmission]] = {
            self.aliases[b]: [] for b in self.buyer_ids
        }
        self.ledger = MessageLedger()
        self.transcript: list[RoundTranscriptEntry] = []
        self.rejected: list[tuple[int, str]] = []
        self._step = 0

    def _log(self, sender, receivers, kind, payload, public=None):
        self._step += 1
        self.ledger.post(sender, _digest(payload))
        self.transcript.append(RoundTranscriptEntry(
            self._step, sender, tuple(receivers), kind, _digest(payload), public,
        ))

    def submit_round(
        self,
        t: int,
        vectors: dict[str, tuple[int, ...]],
        salt_stream,
        monitor_vectors: dict[str, tuple[int, ...]] | None = None,
    ) -> list[Fraction | None]:
        """Steps 3..9: submit, cross-check, aggregate, jointly decrypt.

        Returns the decrypted per-seller high-rated fractions for round t
        and appends them to the session history.  A buyer whose two copies
        disagree has her input dropped from the aggregation.
        """
        monitor_vectors = monitor_vectors or {}
        accepted: list[EncryptedSubmission] = []
        first_message = len(self.ledger.messages)
        for b in self.buyer_ids:
            vector = vectors.get(b, tuple([0] * self.n_sellers))
            mpc, mon = submit_feedback(
                b, self.aliases[b], vector, self.key,
                salt_stream.u64(), monitor_vectors.get(b),
            )
            self._log(b, ("buyers",), "encrypted-feedback", mpc.cells)
            self._log(b, ("monitor", "se"), "monitor-feedback", (mon.commitment,))
            self.monitor_inbox[self.aliases[b]].append(mon)
            if consistency_check(mpc, mon):
                accepted.append(mpc)
            else:
                self.rejected.append((t, b))
                self._log("validators", ("all",), "consistency-reject", (b, t),
                          public={"buyer": b, "round": t})
        aggregate = aggregate_encrypted(accepted, self.n_sellers)
        self._log("buyers", ("buyers",), "aggregate", tuple(aggregate.sale_counts))
        to_decrypt = [ct for ct in aggregate.rated_high if ct is not None]
        values = threshold_decrypt(
            [s for s in self.key.shares], to_decrypt
        )
        it = iter(values)
        row: list[Fraction | None] = [
            next(it) if ct is not None else None for ct in aggregate.rated_high
        ]
        self._log("buyers", ("buyers",), "threshold-decrypt", tuple(row),
                  public={"round": t, "sold": [i for i, v in enumerate(row) if v is not None]})
        self.ledger.record_step(
            executors=set(self.buyer_ids),
            consumed=range(first_message, len(self.ledger.messages) - 1),
            produced=[len(self.ledger.messages) - 1],
        )
        self.iq_history.append(row)
        return row

    def compute_perception(
        self,
        delta_m: Fraction,
        xi: Fraction,
        epoch_starts: list[int],
        anchors: list[Fraction],
        faulty_buyer: str | None = None,
    ) -> list[Fraction]:
        """Step 10: every buyer computes the rating vector, then consensus.

        Honest buyers run one deterministic procedure over identical inputs,
        so their copies coincide and only one evaluation is needed;
        ``faulty_buyer`` injects a corrupted local result to exercise the
        consensus failure path.
        """
        honest = local_public_perception(
            self.iq_history, delta_m, xi, epoch_starts, anchors, self.n_sellers
        )
        local_results = {}
        for b in self.buyer_ids:
            value = honest
            if b == faulty_buyer and honest:
                value = list(honest)
                value[0] = (value[0] + ONE) / 2 if value[0] != ONE else ZERO
            local_results[b] = value
        digests = {b: _digest(tuple(map(rat_str, v))) for b, v in local_results.items()}
        reference = digests[self.buyer_ids[0]]
        if any(d != reference for d in digests.values()):
            bad = sorted(b for b, d in digests.items() if d != reference)
            self._log("buyers", ("all",), "consensus-failure", tuple(bad),
                      public={"disagreeing": bad})
            raise ConsistencyError(f"consensus failure: {bad} disagree")
        self._log("buyers", ("all",), "perception-consensus", reference)
        return local_results[self.buyer_ids[0]]


def public_perception_round(
    session: ProtocolSession,
    t: int,
    vectors: dict[str, tuple[int, ...]],
    delta_m: Fraction,
    xi: Fraction,
    epoch_starts: list[int],
    anchors: list[Fraction],
    salt_stream,
    monitor_vectors=None,
) -> list[Fraction]:
    """One whole protocol round: submissions through consensus rating."""
    session.submit_round(t, vectors, salt_stream, monitor_vectors)
    return session.compute_perception(delta_m, xi, epoch_starts, anchors)


# --------------------------------------------------------------------------
# Bridge into the market engine
# --------------------------------------------------------------------------

class ProtocolBridge:
    """Runs the encrypted rating path alongside a market run and audits it.

    The engine advances on the trusted reference vector; this bridge feeds
    every round's feedback through the full protocol and, at each
    publication, compares the protocol's locally computed vector against the
    reference, exactly.  Leakage corner cases for the round just aggregated
    are evaluated as audit predicates.
    """

    def __init__(self, state):
        from .framework import audit_simulation  # local to avoid cycle noise

        self._audit_simulation = audit_simulation
        buyer_ids = [f"b{i}" for i in range(state.config.n_buyers)]
        se = SoftwareEntity(state.streams.stream("monitor"))
        self.session = ProtocolSession(
            buyer_ids, state.config.n_sellers, se, state.streams.stream("keygen")
        )
        self.salt_stream = state.streams.stream("salt")
        self.audits = []

    def on_publish(self, state, oracle_ratings, delta_m):
        protocol = self.session.compute_perception(
            delta_m, state.config.xi, state.epoch_starts, state.anchors
        )
        predicates = []
        if state.summaries:
            last = state.summaries[-1]

            def corner_predicate(_ledger, last=last, ratings=protocol):
                flags = leakage_flags(last, ratings)
                membership = [str(f) for f in flags if isinstance(f, BuyingPatternLeak)]
                data = [str(f) for f in flags if isinstance(f, FeedbackLeak)]
                return membership, data, [str(f) for f in flags]

            predicates.append(corner_predicate)
        report = self._audit_simulation(
            list(oracle_ratings), protocol, self.session.ledger, predicates
        )
        self.audits.append(report)
        return report

    def on_feedback(self, state, purchases, summary):
        n_s = state.config.n_sellers
        vectors = {
            f"b{i}": encode_feedback(None, n_s)
            for i in range(state.config.n_buyers)
        }
        for p in purchases:
            vectors[f"b{p.buyer}"] = encode_feedback((p.seller, p.quality), n_s)
        self.session.submit_round(summary.t, vectors, self.salt_stream)
