"""Event store, field-level access, and the simulation audit."""

from fractions import Fraction as F

import pytest

from b2bmarket.framework import (
    AccessError,
    AuditReport,
    ComputationStep,
    EventStore,
    FrameworkError,
    MessageLedger,
    Participant,
    TransactionRecord,
    audit_simulation,
)


def store_with_agents(n_buyers=2, n_sellers=2):
    store = EventStore()
    for i in range(n_buyers):
        store.register(Participant(f"b{i}", "buyer"))
    for i in range(n_sellers):
        store.register(Participant(f"s{i}", "seller"))
    return store


def record(price=2, cost=1, quality="High", rating=F(4, 5)):
    return TransactionRecord(F(price), F(cost), quality, F(rating))


def test_default_views_split_by_side():
    store = store_with_agents()
    event_id = store.append_event({"b0", "s0"}, record())
    assert event_id == 0
    assert store.visible_fields("b0") == {0: frozenset({"price", "quality", "rating"})}
    assert store.visible_fields("s0") == {0: frozenset({"price", "cost", "quality"})}


def test_event_ids_are_sequential():
    store = store_with_agents()
    first = store.append_event({"b0", "s0"}, record())
    second = store.append_event({"b1", "s1"}, record(price=3))
    assert (first, second) == (0, 1)
    assert [e.event_id for e in store.events] == [0, 1]


def test_empty_participant_set_rejected():
    store = store_with_agents()
    with pytest.raises(FrameworkError, match="at least one participant"):
        store.append_event(set(), record())


def test_unknown_field_in_access_map_rejected():
    store = store_with_agents()
    with pytest.raises(FrameworkError, match="unknown record fields"):
        store.append_event({"b0"}, record(), access={"b0": {"price", "margin"}})


def test_read_outside_grant_is_an_error_not_a_value():
    store = store_with_agents()
    store.append_event({"b0", "s0"}, record())
    assert store.read_field("s0", 0, "cost") == 1
    with pytest.raises(AccessError):
        store.read_field("s0", 0, "rating")
    with pytest.raises(AccessError):
        store.read_field("b0", 0, "cost")
    with pytest.raises(AccessError):
        store.read_field("b1", 0, "price")  # not a participant of the event


def test_unknown_participant_rejected():
    store = store_with_agents()
    store.append_event({"b0"}, record())
    with pytest.raises(FrameworkError, match="unknown participant"):
        store.visible_fields("ghost")


def test_visible_fields_union_over_events():
    store = store_with_agents()
    store.append_event({"b0", "s0"}, record())
    store.append_event({"b1", "s1"}, record())
    store.append_event({"b0", "s1"}, record())
    assert set(store.visible_fields("b0")) == {0, 2}
    assert store.visible_fields("b1") == {1: frozenset({"price", "quality", "rating"})}
    store2 = store_with_agents(n_buyers=3)
    assert store2.visible_fields("b2") == {}


def test_access_soundness_exhaustive_sweep():
    # Every successful read must be backed by a grant; every grant readable.
    store = store_with_agents(3, 3)
    store.append_event({"b0", "s0"}, record())
    store.append_event({"b1", "s1"}, record(quality="Low", rating=0))
    store.append_event({"b2", "s2"}, record(), access={"b2": {"price"}, "s2": {"cost"}})
    all_ids = [f"b{i}" for i in range(3)] + [f"s{i}" for i in range(3)]
    for pid in all_ids:
        grants = store.visible_fields(pid)
        for event in store.events:
            for name in ("price", "cost", "quality", "rating"):
                granted = name in grants.get(event.event_id, frozenset())
                if granted:
                    store.read_field(pid, event.event_id, name)
                else:
                    with pytest.raises((AccessError, FrameworkError)):
                        store.read_field(pid, event.event_id, name)


def test_export_import_replay_is_byte_identical():
    store = store_with_agents()
    store.append_event({"b0", "s0"}, record())
    store.append_event({"b1", "s1"}, record(price=3, rating=F(1, 3)))
    text = store.export_jsonl()
    participants = [Participant(f"b{i}", "buyer") for i in range(2)]
    participants += [Participant(f"s{i}", "seller") for i in range(2)]
    replayed = EventStore.import_jsonl(text, participants)
    assert replayed.export_jsonl() == text


def test_record_validation():
    with pytest.raises(FrameworkError):
        TransactionRecord(F(-1), F(0), "High", F(1, 2))
    with pytest.raises(FrameworkError):
        TransactionRecord(F(1), F(0), "Medium", F(1, 2))
    with pytest.raises(FrameworkError):
        TransactionRecord(F(1), F(0), "High", F(3, 2))


def test_computation_step_ordering_invariant():
    with pytest.raises(FrameworkError):
        ComputationStep(frozenset({"b0"}), consumed=(3,), produced=(2,))
    step = ComputationStep(frozenset({"b0"}), consumed=(0, 1), produced=(2,))
    assert step.consumed == (0, 1)


def test_message_ledger_appends_in_order():
    ledger = MessageLedger()
    assert ledger.post("b0", "payload-a") == 0
    assert ledger.post("b1", "payload-b") == 1
    ledger.record_step({"b0", "b1"}, consumed=[0, 1], produced=[ledger.post("b0", "sum")])
    assert len(ledger.steps) == 1


# -- the audit ---------------------------------------------------------------

def flag_free(_ledger):
    return [], [], []


def test_audit_passes_on_equal_clean_round():
    report = audit_simulation([F(1, 2)] * 3, [F(1, 2)] * 3, MessageLedger(), [flag_free])
    assert report.passed and report.output_equal


def test_audit_rejects_unequal_outputs():
    report = audit_simulation([F(1, 2)], [F(1, 3)], MessageLedger(), [])
    assert not report.output_equal and not report.passed


def test_audit_requires_matching_lengths():
    with pytest.raises(FrameworkError):
        audit_simulation([F(1)], [F(1), F(1)], MessageLedger(), [])


def test_audit_collects_predicate_flags():
    def two_seller_round(_ledger):
        return (["only sellers [0, 1] sold"], [], ["only sellers [0, 1] sold"])

    def extreme_rating(_ledger):
        return ([], ["seller 2 rating is 1"], ["seller 2 rating is 1"])

    report = audit_simulation(
        [F(1)], [F(1)], MessageLedger(), [two_seller_round, extreme_rating]
    )
    assert report.output_equal
    assert report.membership_leaks == ["only sellers [0, 1] sold"]
    assert report.data_leaks == ["seller 2 rating is 1"]
    assert not report.passed
    assert len(report.corner_case_flags) == 2


def test_audit_report_pass_definition():
    assert AuditReport(True, [], []).passed
    assert not AuditReport(True, ["leak"], []).passed
    assert not AuditReport(False, [], []).passed
