"""Event ledger with field-level access control and the simulation audit.

The market is modelled as a network of participants producing a sequence of
transaction events.  Each event carries a four-field record (price, cost,
quality, rating) and a per-participant visibility map: by default the buyer
side of a trade sees price/quality/rating while the seller side sees
price/cost/quality.  Records live in plaintext inside the store; privacy is
enforced at the query interface, which is the trust boundary under test.

A protocol run is judged a faithful private simulation of the trusted
reference computation when three things hold: the protocol output equals the
reference output exactly, no outsider can infer who took part in an event,
and nobody learns data outside their grants.  The first condition is checked
as exact rational equality.  The other two are undecidable in general, so the
audit evaluates an explicit, finite list of leakage predicates instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .numeric import rat, rat_str

RECORD_FIELDS = ("price", "cost", "quality", "rating")


class FrameworkError(Exception):
    pass


class AccessError(FrameworkError):
    """A participant asked for a field outside its grant."""


@dataclass(frozen=True)
class Participant:
    id: str
    kind: str  # buyer | seller | monitor | software-entity

    KINDS = ("buyer", "seller", "monitor", "software-entity")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise FrameworkError(f"unknown participant kind {self.kind!r}")


@dataclass(frozen=True)
class TransactionRecord:
    price: Fraction
    cost: Fraction
    quality: str  # "High" | "Low"
    rating: Fraction

    def __post_init__(self):
        if self.price < 0 or self.cost < 0:
            raise FrameworkError("price and cost must be non-negative")
        if self.quality not in ("High", "Low"):
            raise FrameworkError(f"quality must be High or Low, got {self.quality!r}")
        if not 0 <= self.rating <= 1:
            raise FrameworkError("rating must lie in [0, 1]")

    def value_of(self, name: str):
        if name not in RECORD_FIELDS:
            raise FrameworkError(f"unknown record field {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class LedgerEvent:
    event_id: int
    participants: frozenset[str]
    record: TransactionRecord
    access: dict[str, frozenset[str]]  # participant id -> visible field names


@dataclass
class ComputationStep:
    executors: frozenset[str]
    consumed: tuple[int, ...]  # indices into the message list
    produced: tuple[int, ...]

    def __post_init__(self):
        if self.consumed and self.produced and max(self.consumed) >= min(self.produced):
            raise FrameworkError("a step may only consume messages older than its outputs")


@dataclass
class MessageLedger:
    """Append-only transcript: ordered opaque messages plus computation steps."""

    messages: list[tuple[str, object]] = field(default_factory=list)
    steps: list[ComputationStep] = field(default_factory=list)

    def post(self, sender: str, payload) -> int:
        self.messages.append((sender, payload))
        return len(self.messages) - 1

    def record_step(self, executors, consumed, produced) -> ComputationStep:
        step = ComputationStep(frozenset(executors), tuple(consumed), tuple(produced))
        self.steps.append(step)
        return step


# Default per-side visibility for a trade record.
BUYER_VIEW = frozenset({"price", "quality", "rating"})
SELLER_VIEW = frozenset({"price", "cost", "quality"})


class EventStore:
    """Registry of participants plus the append-only event list."""

    def __init__(self):
        self._participants: dict[str, Participant] = {}
        self._events: list[LedgerEvent] = []

    # -- participants -------------------------------------------------

    def register(self, participant: Participant) -> Participant:
        if participant.id in self._participants:
            existing = self._participants[participant.id]
            if existing != participant:
                raise FrameworkError(f"id {participant.id!r} already registered")
            return existing
        self._participants[participant.id] = participant
        return participant

    def participant(self, pid: str) -> Participant:
        try:
            return self._participants[pid]
        except KeyError:
            raise FrameworkError(f"unknown participant {pid!r}") from None

    # -- events -------------------------------------------------------

    @property
    def events(self) -> tuple[LedgerEvent, ...]:
        return tuple(self._events)

    def append_event(
        self,
        participants,
        record: TransactionRecord,
        access: dict[str, set[str]] | None = None,
    ) -> int:
        """Store a new event and return its sequence id.

        When no access map is given, the default buyer/seller views apply.
        Access keys must name registered participants; granting a field to
        someone outside the event models an explicitly added observer.
        """
        participants = frozenset(participants)
        if not participants:
            raise FrameworkError("an event needs at least one participant")
        for pid in participants:
            self.participant(pid)
        if access is None:
            access = {}
            for pid in participants:
                kind = self.participant(pid).kind
                if kind == "buyer":
                    access[pid] = set(BUYER_VIEW)
                elif kind == "seller":
                    access[pid] = set(SELLER_VIEW)
                else:
                    access[pid] = set()
        resolved: dict[str, frozenset[str]] = {}
        for pid, names in access.items():
            self.participant(pid)
            names = frozenset(names)
            bad = names - set(RECORD_FIELDS)
            if bad:
                raise FrameworkError(f"unknown record fields {sorted(bad)} for {pid!r}")
            resolved[pid] = names
        event = LedgerEvent(len(self._events), participants, record, resolved)
        self._events.append(event)
        return event.event_id

    def visible_fields(self, pid: str) -> dict[int, frozenset[str]]:
        """All grants of one participant, keyed by event id."""
        self.participant(pid)
        out: dict[int, frozenset[str]] = {}
        for event in self._events:
            names = event.access.get(pid)
            if names:
                out[event.event_id] = names
        return out

    def read_field(self, pid: str, event_id: int, name: str):
        """The only way to extract record data: grant-checked."""
        self.participant(pid)
        if not 0 <= event_id < len(self._events):
            raise FrameworkError(f"no event {event_id}")
        event = self._events[event_id]
        if name not in event.access.get(pid, frozenset()):
            raise AccessError(f"{pid!r} may not read {name!r} of event {event_id}")
        return event.record.value_of(name)

    # -- flat-file export ---------------------------------------------

    def export_jsonl(self) -> str:
        """One event per line; file order is event order."""
        lines = []
        for event in self._events:
            lines.append(json.dumps({
                "event_id": event.event_id,
                "participants": sorted(event.participants),
                "record": {
                    "price": rat_str(event.record.price),
                    "cost": rat_str(event.record.cost),
                    "quality": event.record.quality,
                    "rating": rat_str(event.record.rating),
                },
                "access": {
                    pid: sorted(names)
                    for pid, names in sorted(event.access.items())
                },
            }, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def import_jsonl(cls, text: str, participants) -> "EventStore":
        """Rebuild a store from an export; replay yields identical state."""
        store = cls()
        for p in participants:
            store.register(p)
        for line in text.splitlines():
            if not line.strip():
                continue
            raw = json.loads(line)
            record = TransactionRecord(
                price=rat(raw["record"]["price"]),
                cost=rat(raw["record"]["cost"]),
                quality=raw["record"]["quality"],
                rating=rat(raw["record"]["rating"]),
            )
            access = {pid: set(names) for pid, names in raw["access"].items()}
            store.append_event(raw["participants"], record, access)
        return store


@dataclass
class AuditReport:
    """Outcome of one faithful-simulation audit."""

    output_equal: bool
    membership_leaks: list[str]
    data_leaks: list[str]
    corner_case_flags: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.output_equal and not self.membership_leaks and not self.data_leaks


def audit_simulation(
    oracle_output: list[Fraction],
    protocol_output: list[Fraction],
    ledger: MessageLedger,
    predicates=(),
) -> AuditReport:
    """Compare the trusted-path output against the protocol path.

    Output equality is exact rational comparison, entry by entry.  Each
    predicate is a callable returning (membership_leaks, data_leaks,
    corner_flags) lists for the round under audit; the ledger is available
    to predicates that want to inspect the transcript.
    """
    if len(oracle_output) != len(protocol_output):
        raise FrameworkError("output vectors differ in length")
    equal = all(a == b for a, b in zip(oracle_output, protocol_output))
    membership: list[str] = []
    data: list[str] = []
    corners: list[str] = []
    for predicate in predicates:
        m, d, c = predicate(ledger)
        membership.extend(m)
        data.extend(d)
        corners.extend(c)
    return AuditReport(equal, membership, data, corners)
