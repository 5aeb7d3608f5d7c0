"""Event-triggered assessment runs producing physician recommendations.

Each qualifying event instantiates every configured guideline for the
patient, collects the guidelines' declared data items (from the
abstraction service or the repository, as each item's meta directs), runs
the instances to completion, and routes the recommended actions: simple
ones (tips, reminders, alerts) become pending Communications directly,
medication proposals are grouped per decision and pass through conflict
mitigation first.

The service keeps no state between runs; everything durable lives in the
platform, so restarting the service between two events changes nothing.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .abstractions import AbstractionService
from .datasources import DataResolver
from .engine import (
    DataValueBinding,
    EngineInstance,
    ReportedAction,
    enact,
    export_transition_dict,
    run_to_completion,
    set_data_values,
    terminate,
)
from .engine.tristate import UNKNOWN
from .interactions import (
    ConflictMitigator,
    MedicationProposal,
    ProposalOption,
    format_by_gate,
)
from .model import GuidelineDefinition
from .platform import EventEnvelope, Platform, Resource

logger = logging.getLogger(__name__)

DIRECT = "direct-communication"
MEDIATED = "gocom-mediation"

SIMPLE_KINDS = ("tip", "reminder", "alert")


@dataclass(frozen=True)
class RoutingTable:
    """interventionType -> routing decision, total over the known vocabulary."""

    routes: dict[str, str]

    @classmethod
    def default(cls) -> "RoutingTable":
        return cls(
            {
                "tip": DIRECT,
                "reminder": DIRECT,
                "alert": DIRECT,
                "medication-proposal": MEDIATED,
            }
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RoutingTable":
        routes = dict(cls.default().routes)
        routes.update(json.loads(Path(path).read_text(encoding="utf-8")))
        return cls(routes)

    def route_for(self, intervention_type: str | None) -> str:
        route = self.routes.get(intervention_type or "")
        if route is None:
            logger.warning(
                "unrecognized interventionType %r routed directly", intervention_type
            )
            return DIRECT
        return route


@dataclass
class AssessmentRun:
    run_id: str
    patient_id: str
    trigger_event: EventEnvelope
    instances: list[str] = field(default_factory=list)
    gathered: dict[str, object] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    status: str = "running"


class AssessmentService:
    def __init__(
        self,
        platform: Platform,
        abstractions: AbstractionService,
        mitigator: ConflictMitigator | None,
        definitions: list[GuidelineDefinition],
        routing: RoutingTable | None = None,
        clock: Callable[[], int] | None = None,
        source_label: str = "system",
    ):
        self.platform = platform
        self.mitigator = mitigator
        self.definitions = sorted(definitions, key=lambda d: d.id)
        self.routing = routing or RoutingTable.default()
        self.clock = clock or platform.clock
        self.source_label = source_label
        # Assessments run non-interactively: only computed abstractions and
        # stored resources can feed them.
        self.resolver = DataResolver(
            platform, abstractions, allowed_sources=("kdom", "dp")
        )
        # Test hook: when set to a list, finished instances are appended to it.
        self.instance_sink: list[EngineInstance] | None = None

    # -- input collection ---------------------------------------------------

    def collect_inputs(
        self, definition: GuidelineDefinition, patient_id: str, now: int
    ) -> dict[str, object]:
        """Resolve every declared data item; missing data stays unknown."""
        gathered: dict[str, object] = {}
        for item in definition.data_items:
            value = self.resolver.resolve(item, patient_id, now)
            if value is not UNKNOWN:
                gathered[item.name] = value
        return gathered

    # -- recommendation routing ----------------------------------------------

    def _write_simple(
        self, run: AssessmentRun, cig_id: str, action: ReportedAction
    ) -> str:
        kind = action.meta.get("interventionType") or "tip"
        payload = {
            "kind": kind,
            "title": action.meta.get("title", action.name),
            "text": action.meta.get("evidence", ""),
            "source_cig": cig_id,
            "task": action.name,
        }
        rid = self.platform.store(
            Resource(
                resource_type="Communication",
                patient_id=run.patient_id,
                code=kind,
                value=payload,
                source_type=self.source_label,
                status="pending",
                effective_at=self.clock(),
            )
        )
        run.outputs.append(rid)
        return rid

    def _proposal_payload_unverified(self, proposal: MedicationProposal) -> dict:
        fmt = format_by_gate([True] * len(proposal.options), proposal.gate)
        return {
            "kind": "proposal",
            "source_cig": proposal.source_cig,
            "decision_task": proposal.decision_task,
            "gate": proposal.gate,
            "instruction": fmt.instruction,
            "required": fmt.required,
            "allowed": fmt.allowed,
            "escalation": True,
            "verified": False,
            "options": [
                {
                    "code": o.medication_code,
                    "task": o.action_task,
                    "safe": None,
                    "evidence": o.evidence,
                    "conflicts": [],
                }
                for o in proposal.options
            ],
        }

    def _write_proposal(self, run: AssessmentRun, proposal: MedicationProposal) -> str:
        if self.mitigator is None:
            payload = self._proposal_payload_unverified(proposal)
        else:
            try:
                revised = self.mitigator.mitigate(proposal)
            except Exception:
                logger.exception("conflict mitigation unavailable; flagging proposal")
                payload = self._proposal_payload_unverified(proposal)
            else:
                payload = {
                    "kind": "proposal",
                    "source_cig": revised.source_cig,
                    "decision_task": revised.decision_task,
                    "gate": revised.gate,
                    "instruction": revised.instruction,
                    "required": revised.required,
                    "allowed": revised.allowed,
                    "escalation": revised.escalation,
                    "verified": True,
                    "options": [
                        {
                            "code": o.medication_code,
                            "task": o.action_task,
                            "safe": o.safe,
                            "evidence": o.evidence,
                            "conflicts": [
                                {
                                    "other_code": c.other_code,
                                    "severity": c.severity,
                                    "origin": c.origin,
                                    "explanation": c.explanation,
                                }
                                for c in o.conflicts
                            ],
                        }
                        for o in revised.options
                    ],
                }
        rid = self.platform.store(
            Resource(
                resource_type="Communication",
                patient_id=run.patient_id,
                code="medication-proposal",
                value=payload,
                source_type=self.source_label,
                status="pending",
                effective_at=self.clock(),
            )
        )
        run.outputs.append(rid)
        return rid

    def route_recommendations(
        self,
        run: AssessmentRun,
        reported: list[tuple[GuidelineDefinition, list[ReportedAction]]],
    ) -> list[str]:
        """Each reported action yields exactly one Communication or one
        membership in a grouped proposal."""
        written: list[str] = []
        for definition, actions in reported:
            proposals: dict[str, MedicationProposal] = {}
            for action in actions:
                itype = action.meta.get("interventionType")
                if self.routing.route_for(itype) == MEDIATED:
                    decision = action.meta.get("decisionRef", action.name)
                    gate = "AND"
                    decision_task = definition.task_map.get(decision)
                    if decision_task is not None:
                        gate = decision_task.meta.get("gate", "AND")
                    option = ProposalOption(
                        medication_code=action.meta.get("medicationCode", action.name),
                        action_task=action.name,
                        evidence=action.meta.get("evidence", ""),
                    )
                    existing = proposals.get(decision)
                    if existing is None:
                        proposals[decision] = MedicationProposal(
                            patient_id=run.patient_id,
                            source_cig=definition.id,
                            decision_task=decision,
                            gate=gate,
                            options=(option,),
                        )
                    else:
                        proposals[decision] = MedicationProposal(
                            patient_id=existing.patient_id,
                            source_cig=existing.source_cig,
                            decision_task=existing.decision_task,
                            gate=existing.gate,
                            options=existing.options + (option,),
                        )
                else:
                    written.append(self._write_simple(run, definition.id, action))
            for proposal in proposals.values():
                written.append(self._write_proposal(run, proposal))
        return written

    # -- the operational cycle -------------------------------------------------

    def handle_event(self, ev: EventEnvelope) -> AssessmentRun:
        """Full assessment: instantiate, collect, run, route, terminate."""
        run = AssessmentRun(
            run_id=f"{ev.patient_id}-e{ev.seq:04d}-assessment",
            patient_id=ev.patient_id,
            trigger_event=ev,
        )
        now = self.clock()
        reported: list[tuple[GuidelineDefinition, list[ReportedAction]]] = []
        for definition in self.definitions:
            instance_id = f"{ev.patient_id}-e{ev.seq:04d}-{definition.id}"
            try:
                inst = enact(
                    definition,
                    ev.patient_id,
                    instance_id=instance_id,
                    clock=self.clock,
                    validated=True,
                )
                gathered = self.collect_inputs(definition, ev.patient_id, now)
                run.gathered.update(gathered)
                set_data_values(
                    inst,
                    [
                        DataValueBinding(item=name, value=value, origin="external")
                        for name, value in gathered.items()
                    ],
                )
                report = run_to_completion(inst)
                terminate(inst)
                self._store_trace(inst)
                if self.instance_sink is not None:
                    self.instance_sink.append(inst)
                run.instances.append(instance_id)
                reported.append((definition, list(report.recommended)))
            except Exception as exc:
                logger.exception("guideline %s failed; skipping", definition.id)
                run.failures.append(f"{definition.id}: {exc}")
        self.route_recommendations(run, reported)
        run.status = "done"
        return run

    def _store_trace(self, inst: EngineInstance) -> None:
        records = [
            export_transition_dict(inst.instance_id, r) for r in inst.transition_log
        ]
        self.platform.append_trace(inst.instance_id, records, patient_id=inst.patient_id)
