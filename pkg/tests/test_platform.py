"""Resource repository, traces, event bus, and journal recovery."""
import threading

import pytest
from hypothesis import given, settings, strategies as st

from careflow.platform import (
    DuplicateIdError,
    EventEnvelope,
    IllegalStatusError,
    Platform,
    PlatformError,
    Resource,
    ResourceQuery,
    SequenceError,
    Subscription,
    matches,
)


def _obs(patient="p1", code="body-temperature", value=38.0, at=100, source="patient", **kw):
    return Resource(
        resource_type="Observation",
        patient_id=patient,
        code=code,
        value=value,
        source_type=source,
        effective_at=at,
        **kw,
    )


def test_store_and_query_communication():
    p = Platform()
    p.store(
        Resource(
            resource_type="Communication",
            patient_id="p1",
            code="tip",
            value={"kind": "tip"},
            source_type="system",
            status="pending",
            effective_at=5,
        )
    )
    hits = p.query(ResourceQuery(resource_type="Communication", patient_id="p1"))
    assert len(hits) == 1 and hits[0].value == {"kind": "tip"}


def test_query_ordering_chronological():
    p = Platform()
    p.store(_obs(at=200, value=39.0))
    p.store(_obs(at=100, value=38.0))
    hits = p.query(ResourceQuery(resource_type="Observation", patient_id="p1"))
    assert [r.effective_at for r in hits] == [100, 200]
    newest = p.query(
        ResourceQuery(resource_type="Observation", patient_id="p1", order="desc", limit=1)
    )
    assert newest[0].effective_at == 200


def test_duplicate_id_rejected():
    p = Platform()
    p.store(_obs(id="fixed"))
    with pytest.raises(DuplicateIdError):
        p.store(_obs(id="fixed"))


def test_patient_required_for_scoped_types():
    p = Platform()
    with pytest.raises(PlatformError):
        p.store(Resource(resource_type="Observation", patient_id="", code="x"))


def test_source_type_filter_excludes_other_creators():
    p = Platform()
    p.store(_obs(source="patient", value=38.0))
    p.store(_obs(source="physician", value=37.0, at=150))
    hits = p.query(
        ResourceQuery(resource_type="Observation", patient_id="p1", source_type="patient")
    )
    assert [r.source_type for r in hits] == ["patient"]
    # Omitted source_type matches any creator.
    assert len(p.query(ResourceQuery(resource_type="Observation", patient_id="p1"))) == 2


def test_empty_store_empty_result():
    p = Platform()
    assert p.query(ResourceQuery(resource_type="Observation", patient_id="p1")) == []


def test_window_filter_is_exclusive_inclusive():
    p = Platform()
    p.store(_obs(at=100))
    p.store(_obs(at=200))
    p.store(_obs(at=300))
    hits = p.query(
        ResourceQuery(resource_type="Observation", patient_id="p1", window=(100, 300))
    )
    # (from, to]: 100 excluded, 300 included.
    assert [r.effective_at for r in hits] == [200, 300]


def test_status_lifecycle():
    p = Platform()
    rid = p.store(_obs(status="pending"))
    assert p.update_status(rid, "accepted").status == "accepted"
    with pytest.raises(IllegalStatusError):
        p.update_status(rid, "pending")
    rid2 = p.store(_obs(status="pending"))
    p.update_status(rid2, "rejected")
    with pytest.raises(IllegalStatusError):
        p.update_status(rid2, "expired")


def test_trace_append_and_read():
    p = Platform()
    records = [
        {"instance_id": "i1", "seq": s, "task": "t", "from": "dormant",
         "to": "in_progress", "cause": "antecedents_met", "at": 0}
        for s in range(1, 6)
    ]
    assert p.append_trace("i1", records, patient_id="p1") == 5
    assert p.get_trace("i1") == records
    assert p.instances_for_patient("p1") == ["i1"]


def test_trace_seq_regression_rejected():
    p = Platform()
    p.append_trace("i1", [{"seq": 5, "task": "t", "from": "a", "to": "b", "cause": "c", "at": 0}], patient_id="p1")
    with pytest.raises(SequenceError):
        p.append_trace("i1", [{"seq": 3, "task": "t", "from": "a", "to": "b", "cause": "c", "at": 0}], patient_id="p1")


def test_journal_restart_round_trip(tmp_path):
    journal = tmp_path / "journal.ndjson"
    p = Platform(journal_path=journal)
    rid = p.store(_obs(status="pending"))
    p.update_status(rid, "accepted")
    p.append_trace(
        "i1",
        [{"instance_id": "i1", "seq": 1, "task": "t", "from": "dormant",
          "to": "in_progress", "cause": "antecedents_met", "at": 7}],
        patient_id="p1",
    )
    p.publish(EventEnvelope(event_type="time-tick", patient_id="p1"))
    p.close()

    reborn = Platform(journal_path=journal)
    assert reborn.get(rid).status == "accepted"
    assert reborn.get_trace("i1") == p.get_trace("i1")
    assert reborn.instances_for_patient("p1") == ["i1"]
    # Sequence numbers continue rather than restarting.
    assert reborn.publish(EventEnvelope(event_type="time-tick", patient_id="p1")) == 2
    # Auto-assigned resource ids continue too.
    new_id = reborn.store(_obs())
    assert new_id != rid


def test_publish_delivers_to_matching_subscribers():
    p = Platform()
    seen_a, seen_b = [], []
    p.subscribe(Subscription("a", frozenset({"symptom-reported"})), seen_a.append)
    p.subscribe(Subscription("b", frozenset({"symptom-reported", "time-tick"})), seen_b.append)
    p.publish(EventEnvelope(event_type="symptom-reported", patient_id="p1"))
    p.publish(EventEnvelope(event_type="time-tick", patient_id="p1"))
    assert [e.event_type for e in seen_a] == ["symptom-reported"]
    assert [e.event_type for e in seen_b] == ["symptom-reported", "time-tick"]
    assert [e.seq for e in seen_b] == [1, 2]


def test_publish_without_subscribers_archives():
    p = Platform()
    assert p.publish(EventEnvelope(event_type="unwatched", patient_id="p1")) == 1
    assert p.publish(EventEnvelope(event_type="unwatched", patient_id="p1")) == 2
    assert len(p.events_for_patient("p1")) == 2


def test_no_replay_for_late_subscribers():
    p = Platform()
    p.publish(EventEnvelope(event_type="time-tick", patient_id="p1"))
    seen = []
    p.subscribe(Subscription("late", frozenset({"time-tick"})), seen.append)
    assert seen == []
    p.publish(EventEnvelope(event_type="time-tick", patient_id="p1"))
    assert [e.seq for e in seen] == [2]


def test_unmatched_event_type_not_delivered():
    p = Platform()
    seen = []
    p.subscribe(Subscription("s", frozenset({"a", "b"})), seen.append)
    p.publish(EventEnvelope(event_type="c", patient_id="p1"))
    assert seen == []


def test_duplicate_subscriber_rejected():
    p = Platform()
    p.subscribe(Subscription("s", frozenset({"a"})), lambda e: None)
    with pytest.raises(DuplicateIdError):
        p.subscribe(Subscription("s", frozenset({"b"})), lambda e: None)


def test_per_patient_ordering_under_concurrency():
    p = Platform()
    received: dict[str, list[int]] = {}
    lock = threading.Lock()

    def handler(ev):
        with lock:
            received.setdefault(ev.patient_id, []).append(ev.seq)

    p.subscribe(Subscription("s", frozenset({"tick"})), handler)

    def pump(patient):
        for _ in range(50):
            p.publish(EventEnvelope(event_type="tick", patient_id=patient))

    threads = [threading.Thread(target=pump, args=(f"p{i}",)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for patient, seqs in received.items():
        assert seqs == list(range(1, 51)), patient


# -- query soundness/completeness against a linear-scan oracle -----------------

_codes = st.sampled_from(["alpha", "beta", "gamma"])
_sources = st.sampled_from(["patient", "physician", "system"])
_statuses = st.sampled_from(["active", "pending", "accepted"])

_resources = st.lists(
    st.builds(
        _obs,
        code=_codes,
        source=_sources,
        at=st.integers(0, 50),
        status=_statuses,
        value=st.integers(0, 5),
    ),
    max_size=25,
)

_queries = st.builds(
    ResourceQuery,
    resource_type=st.just("Observation"),
    patient_id=st.just("p1"),
    code=st.none() | _codes,
    source_type=st.none() | _sources,
    status=st.none() | _statuses,
    window=st.none()
    | st.tuples(st.integers(0, 50), st.integers(0, 50)).map(
        lambda t: (min(t), max(t))
    ),
)


@given(_resources, _queries)
@settings(max_examples=200, deadline=None)
def test_query_matches_linear_scan_oracle(resources, query):
    p = Platform()
    stored = [p.get(p.store(r)) for r in resources]
    expected = {r.id for r in stored if matches(r, query)}
    got = {r.id for r in p.query(query)}
    assert got == expected
