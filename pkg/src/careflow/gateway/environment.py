"""Wiring of the full execution environment behind one front door.

The environment owns the platform, the virtual clock, the abstraction
service, conflict mitigation, and the assessment/coaching services, and
adds the human-facing surface: recommendation listing and response
handling with gate enforcement.  Everything durable lives in the platform
journal, so an environment can be torn down and rebuilt from the same
configuration at any event boundary without changing behaviour.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..abstractions import AbstractionService, load_rules
from ..assessments import AssessmentService, RoutingTable
from ..coaching import CoachingService
from ..interactions import ConflictMitigator, load_interaction_kb
from ..model import GuidelineDefinition, errors_of, load_guideline_file, validate_guideline
from ..platform import (
    EventEnvelope,
    Platform,
    Resource,
    ResourceQuery,
    Subscription,
)
from .clock import VirtualClock

logger = logging.getLogger(__name__)

ASSESSMENT_EVENTS = frozenset({"symptom-reported"})
COACHING_EVENTS = frozenset({"time-tick", "capsule-completed"})


class GatewayError(Exception):
    pass


class UnknownPatientError(GatewayError):
    pass


class UnknownRecommendationError(GatewayError):
    pass


class AlreadyRespondedError(GatewayError):
    pass


class ResponseGateError(GatewayError):
    """Chosen options do not satisfy the recommendation's gate."""


@dataclass(frozen=True)
class RecommendationResponse:
    communication_id: str
    responder: str  # physician | patient
    verdict: str  # accepted | rejected
    chosen_options: tuple[str, ...] = ()
    at: int | None = None


@dataclass
class EnvironmentConfig:
    cigs_dir: Path
    master_path: Path | None = None
    kdom_rules_path: Path | None = None
    interaction_kb_path: Path | None = None
    routing_path: Path | None = None
    external_data_path: Path | None = None
    journal_path: Path | None = None
    fsync: bool = False
    assessment_events: frozenset[str] = ASSESSMENT_EVENTS
    coaching_events: frozenset[str] = COACHING_EVENTS
    iteration_cap: int = 1000


def _load_cig_dir(path: Path) -> tuple[list[GuidelineDefinition], list[str]]:
    """Load every *.json guideline; broken files are skipped and reported."""
    definitions: list[GuidelineDefinition] = []
    failures: list[str] = []
    if not path.is_dir():
        return definitions, failures
    for file in sorted(path.glob("*.json")):
        try:
            definition = load_guideline_file(file)
            issues = errors_of(validate_guideline(definition))
            if issues:
                raise ValueError("; ".join(str(i) for i in issues))
            definitions.append(definition)
        except Exception as exc:
            logger.error("skipping guideline %s: %s", file.name, exc)
            failures.append(f"{file.name}: {exc}")
    return definitions, failures


class Environment:
    """One fully wired instance of the execution environment."""

    def __init__(self, config: EnvironmentConfig):
        self.config = config
        self.clock = VirtualClock()
        self.platform = Platform(
            journal_path=config.journal_path,
            clock=self.clock.now,
            fsync=config.fsync,
        )
        self.load_failures: list[str] = []

        self.abstractions = AbstractionService(self.platform)
        if config.kdom_rules_path is not None:
            load_rules(self.abstractions, config.kdom_rules_path)

        mitigator = None
        if config.interaction_kb_path is not None:
            kb = load_interaction_kb(config.interaction_kb_path)
            mitigator = ConflictMitigator(kb, self.platform)
        self.mitigator = mitigator

        assessment_defs, failures = _load_cig_dir(Path(config.cigs_dir) / "pdss")
        self.load_failures.extend(failures)
        coaching_defs, failures = _load_cig_dir(Path(config.cigs_dir) / "vc")
        self.load_failures.extend(failures)

        master = None
        if config.master_path is not None and Path(config.master_path).exists():
            try:
                master = load_guideline_file(config.master_path)
                issues = errors_of(validate_guideline(master))
                if issues:
                    raise ValueError("; ".join(str(i) for i in issues))
            except Exception as exc:
                logger.error("master guideline unusable: %s", exc)
                self.load_failures.append(f"master: {exc}")
                master = None

        routing = (
            RoutingTable.from_file(config.routing_path)
            if config.routing_path is not None
            else RoutingTable.default()
        )
        external_data: dict[str, object] = {}
        if config.external_data_path is not None and Path(config.external_data_path).exists():
            external_data = json.loads(
                Path(config.external_data_path).read_text(encoding="utf-8")
            )

        self.assessments = AssessmentService(
            platform=self.platform,
            abstractions=self.abstractions,
            mitigator=self.mitigator,
            definitions=assessment_defs,
            routing=routing,
            clock=self.clock.now,
        )
        self.coaching = CoachingService(
            platform=self.platform,
            abstractions=self.abstractions,
            master=master,
            specialized={d.id: d for d in coaching_defs},
            external_data=external_data,
            clock=self.clock.now,
            iteration_cap=config.iteration_cap,
        )

        self.platform.subscribe(
            Subscription("assessment", config.assessment_events),
            lambda ev: self.assessments.handle_event(ev),
        )
        self.platform.subscribe(
            Subscription("coaching", config.coaching_events),
            lambda ev: self.coaching.handle_event(ev),
        )

    # -- front-door operations -------------------------------------------------

    def post_event(self, ev: EventEnvelope) -> tuple[str, int]:
        """Publish an event; all triggered processing completes synchronously."""
        if not self.platform.has_patient(ev.patient_id):
            raise UnknownPatientError(f"unknown patient {ev.patient_id!r}")
        if ev.at is not None:
            self.clock.advance_to(ev.at)
        envelope = EventEnvelope(
            event_type=ev.event_type,
            patient_id=ev.patient_id,
            payload=ev.payload,
            at=self.clock.now(),
        )
        seq = self.platform.publish(envelope)
        return f"{ev.patient_id}-e{seq:04d}", seq

    def register_patient(self, patient_id: str, properties: dict[str, str] | None = None) -> str:
        return self.platform.store(
            Resource(
                resource_type="Patient",
                patient_id=patient_id,
                code="patient",
                value=None,
                source_type="system",
                status="active",
                effective_at=self.clock.now(),
                properties=properties or {},
                id=patient_id,
            )
        )

    def _view(self, res: Resource) -> dict:
        payload = res.value if isinstance(res.value, dict) else {}
        view = {
            "id": res.id,
            "status": res.status,
            "effective_at": res.effective_at,
            "patient_id": res.patient_id,
        }
        view.update(payload)
        return view

    def list_recommendations(self, patient_id: str, status: str | None = None) -> list[dict]:
        """Communications for the patient, newest first."""
        if not self.platform.has_patient(patient_id):
            raise UnknownPatientError(f"unknown patient {patient_id!r}")
        hits = self.platform.query(
            ResourceQuery(
                resource_type="Communication",
                patient_id=patient_id,
                status=status,
                order="desc",
            )
        )
        return [self._view(r) for r in hits]

    def _check_gate(self, payload: dict, chosen: tuple[str, ...]) -> None:
        if payload.get("kind") != "proposal":
            if chosen:
                raise ResponseGateError("options only apply to medication proposals")
            return
        codes = [o.get("code") for o in payload.get("options", [])]
        if len(set(chosen)) != len(chosen):
            raise ResponseGateError("duplicate chosen options")
        unknown = [c for c in chosen if c not in codes]
        if unknown:
            raise ResponseGateError(f"unknown options {unknown}")
        gate = payload.get("gate", "AND")
        if gate == "AND" and set(chosen) != set(codes):
            raise ResponseGateError("gate AND requires choosing all options")
        if gate == "OR" and len(chosen) < 1:
            raise ResponseGateError("gate OR requires choosing at least one option")
        if gate == "XOR" and len(chosen) != 1:
            raise ResponseGateError("gate XOR requires choosing exactly one option")

    def respond(self, resp: RecommendationResponse) -> dict:
        """Record a human verdict; accepted medication options become active.

        The gate rule is enforced here no matter what client produced the
        request: AND = all options, OR = at least one, XOR = exactly one.
        """
        res = self.platform.get(resp.communication_id)
        if res is None or res.resource_type != "Communication":
            raise UnknownRecommendationError(
                f"unknown recommendation {resp.communication_id!r}"
            )
        if res.status != "pending":
            raise AlreadyRespondedError(
                f"recommendation {res.id} already {res.status}"
            )
        if resp.verdict not in ("accepted", "rejected"):
            raise GatewayError(f"bad verdict {resp.verdict!r}")
        if resp.at is not None:
            self.clock.advance_to(resp.at)
        chosen = tuple(resp.chosen_options)
        payload = res.value if isinstance(res.value, dict) else {}
        if resp.verdict == "accepted":
            self._check_gate(payload, chosen)
        elif chosen:
            raise ResponseGateError("a rejection cannot carry chosen options")
        updated = self.platform.update_status(res.id, resp.verdict)
        if resp.verdict == "accepted":
            for code in chosen:
                self.platform.store(
                    Resource(
                        resource_type="MedicationStatement",
                        patient_id=res.patient_id,
                        code=code,
                        value=None,
                        source_type=resp.responder,
                        status="active",
                        effective_at=self.clock.now(),
                        properties={"origin_communication": res.id},
                    )
                )
        self.platform.publish(
            EventEnvelope(
                event_type="recommendation-response",
                patient_id=res.patient_id,
                payload={
                    "communication_id": res.id,
                    "verdict": resp.verdict,
                    "responder": resp.responder,
                    "chosen": ",".join(chosen),
                },
                at=self.clock.now(),
            )
        )
        return self._view(updated)

    def trace_lines(self, patient_id: str) -> list[str]:
        """Per-patient transition log in the stable export field order."""
        if not self.platform.has_patient(patient_id):
            raise UnknownPatientError(f"unknown patient {patient_id!r}")
        lines: list[str] = []
        for instance_id in self.platform.instances_for_patient(patient_id):
            for record in self.platform.get_trace(instance_id):
                lines.append(json.dumps(record, separators=(", ", ": ")))
        return lines

    def close(self) -> None:
        self.platform.close()
