"""Assessment runs: input collection, engine runs, recommendation routing."""
import json
from pathlib import Path

from careflow.abstractions import AbstractionService, load_rules
from careflow.assessments import AssessmentService, RoutingTable
from careflow.interactions import ConflictMitigator, load_interaction_kb
from careflow.model import load_guideline_file, parse_guideline
from careflow.platform import EventEnvelope, Platform, Resource, ResourceQuery

ASSETS = Path(__file__).resolve().parent.parent / "assets"


def _platform_at(now=3600):
    # Unit-test stand-in for the gateway clock: frozen at event time.
    return Platform(clock=lambda: now)


def _service(platform=None, definitions=None, mitigator="default"):
    platform = platform or _platform_at()
    abstractions = AbstractionService(platform)
    load_rules(abstractions, ASSETS / "kdom" / "rules.json")
    if mitigator == "default":
        kb = load_interaction_kb(ASSETS / "kb" / "interactions.csv")
        mitigator = ConflictMitigator(kb, platform)
    if definitions is None:
        definitions = [
            load_guideline_file(p) for p in sorted((ASSETS / "cigs" / "pdss").glob("*.json"))
        ]
    return (
        AssessmentService(
            platform=platform,
            abstractions=abstractions,
            mitigator=mitigator,
            definitions=definitions,
        ),
        platform,
    )


def _store_temp(platform, value=38.6, at=100, patient="p1"):
    platform.store(
        Resource(
            resource_type="Observation",
            patient_id=patient,
            code="body-temperature",
            value=value,
            source_type="patient",
            effective_at=at,
        )
    )


def _event(patient="p1", seq=1, event_type="symptom-reported"):
    return EventEnvelope(
        event_type=event_type, patient_id=patient, payload={}, at=3600, seq=seq
    )


def _comms(platform, patient="p1"):
    return platform.query(
        ResourceQuery(resource_type="Communication", patient_id=patient)
    )


def test_fever_event_routes_only_applicable_guideline():
    service, platform = _service()
    _store_temp(platform)
    run = service.handle_event(_event())
    assert run.status == "done"
    assert len(run.instances) == 5
    comms = _comms(platform)
    kinds = sorted(c.value["kind"] for c in comms)
    assert kinds == ["proposal", "tip"]
    # All output originates from the fever guideline; the other four
    # contribute nothing.
    assert {c.value["source_cig"] for c in comms} == {"fever_management"}


def test_event_with_no_data_yields_nothing():
    service, platform = _service()
    run = service.handle_event(_event())
    assert run.status == "done"
    assert run.outputs == []
    assert _comms(platform) == []


def test_engine_failure_is_isolated():
    # Runtime type error in one guideline must not stop the others.
    bad = parse_guideline(json.dumps({
        "id": "aaa_broken",
        "version": "1",
        "description": "",
        "data_items": [],
        "tasks": [
            {"name": "root", "kind": "plan", "components": ["a"]},
            {"name": "a", "kind": "action", "precondition": "1 + 1"},
        ],
        "root_plan": "root",
    }))
    good = [
        load_guideline_file(p) for p in sorted((ASSETS / "cigs" / "pdss").glob("*.json"))
    ]
    service, platform = _service(definitions=[bad] + good)
    _store_temp(platform)
    run = service.handle_event(_event())
    assert any("aaa_broken" in f for f in run.failures)
    assert len(run.instances) == 5  # all healthy guidelines still ran
    assert sorted(c.value["kind"] for c in _comms(platform)) == ["proposal", "tip"]


def test_collect_inputs_kdom_and_dp_dispatch():
    service, platform = _service()
    fever = next(d for d in service.definitions if d.id == "fever_management")
    _store_temp(platform)
    platform.store(
        Resource(
            resource_type="Observation",
            patient_id="p1",
            code="symptom-assessment",
            value=None,
            source_type="physician",
            status="completed",
            effective_at=200,
            properties={"cancer-treatment-related": "true"},
        )
    )
    gathered = service.collect_inputs(fever, "p1", now=3600)
    assert gathered == {"temp_grade": 2, "cancer_related": True}


def test_collect_inputs_source_type_mismatch_is_unknown():
    # Item requires a physician-created resource; only the patient wrote one.
    service, platform = _service()
    fever = next(d for d in service.definitions if d.id == "fever_management")
    platform.store(
        Resource(
            resource_type="Observation",
            patient_id="p1",
            code="symptom-assessment",
            value=None,
            source_type="patient",
            effective_at=200,
            properties={"cancer-treatment-related": "true"},
        )
    )
    gathered = service.collect_inputs(fever, "p1", now=3600)
    assert "cancer_related" not in gathered


class _CountingMitigator(ConflictMitigator):
    def __init__(self, kb, platform):
        super().__init__(kb, platform)
        self.calls = 0

    def mitigate(self, proposal):
        self.calls += 1
        return super().mitigate(proposal)


def test_proposal_mediated_exactly_once_and_tip_direct():
    platform = _platform_at()
    kb = load_interaction_kb(ASSETS / "kb" / "interactions.csv")
    counting = _CountingMitigator(kb, platform)
    service, platform = _service(platform=platform, mitigator=counting)
    _store_temp(platform)
    service.handle_event(_event())
    comms = _comms(platform)
    # Mixed report: one tip plus a two-option proposal -> 2 Communications.
    assert len(comms) == 2
    proposal = next(c for c in comms if c.value["kind"] == "proposal")
    assert [o["code"] for o in proposal.value["options"]] == ["paracetamol", "ibuprofen"]
    assert proposal.value["gate"] == "XOR"
    assert counting.calls == 1


def test_exactly_once_membership():
    service, platform = _service()
    _store_temp(platform)
    run = service.handle_event(_event())
    comms = _comms(platform)
    routed_tasks = []
    for c in comms:
        if c.value["kind"] == "proposal":
            routed_tasks.extend(o["task"] for o in c.value["options"])
        else:
            routed_tasks.append(c.value["task"])
    assert sorted(routed_tasks) == ["a_fluids_tip", "a_ibuprofen", "a_paracetamol"]


def test_mitigator_unavailable_writes_unverified_escalation():
    service, platform = _service(mitigator=None)
    _store_temp(platform)
    service.handle_event(_event())
    proposal = next(c for c in _comms(platform) if c.value["kind"] == "proposal")
    assert proposal.value["verified"] is False
    assert proposal.value["escalation"] is True
    assert all(o["safe"] is None for o in proposal.value["options"])


def test_statelessness_across_service_instances():
    # Two events handled by two fresh services over one platform produce the
    # same results as one service handling both.
    def run(events_per_service):
        platform = _platform_at()
        _store_temp(platform)
        outputs = []
        for batch in events_per_service:
            service, _ = _service(platform=platform)
            for ev in batch:
                service.handle_event(ev)
        for c in _comms(platform):
            outputs.append((c.id, c.value["kind"], c.value.get("task", "")))
        return outputs

    together = run([[_event(seq=1), _event(seq=2)]])
    split = run([[_event(seq=1)], [_event(seq=2)]])
    assert together == split


def test_traces_appended_per_instance():
    service, platform = _service()
    _store_temp(platform)
    run = service.handle_event(_event())
    for instance_id in run.instances:
        trace = platform.get_trace(instance_id)
        assert trace, instance_id
        assert [r["seq"] for r in trace] == list(range(1, len(trace) + 1))
    assert platform.instances_for_patient("p1") == run.instances


def test_routing_table_defaults_and_warning(caplog):
    table = RoutingTable.default()
    assert table.route_for("tip") == "direct-communication"
    assert table.route_for("medication-proposal") == "gocom-mediation"
    with caplog.at_level("WARNING"):
        assert table.route_for("mystery") == "direct-communication"
    assert "unrecognized" in caplog.text
