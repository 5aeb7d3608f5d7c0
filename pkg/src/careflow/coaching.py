"""Patient coaching sessions driven by a master dispatch guideline.

A qualifying event enacts the master guideline, which reads the current
context (time of day, recent reports, mood) and invokes whichever
specialized guidelines apply.  The session then loops over the active
action and enquiry tasks of every instance: actions are carried out
according to their ``interventionType`` meta (message to the patient,
invocation of another guideline, or a named internal handler), enquiry
sources are resolved through their ``source`` meta.  The loop ends when an
iteration makes no progress; an iteration cap guards against runaway
definitions.

Like the assessment service, this component is stateless between events.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from .abstractions import AbstractionService
from .datasources import DataResolver, coerce_value
from .engine import (
    DataValueBinding,
    EngineInstance,
    TaskState,
    active_tasks,
    advance,
    complete_action,
    discard_task,
    enact,
    export_transition_dict,
    set_data_values,
    terminate,
)
from .engine.tristate import UNKNOWN
from .model import GuidelineDefinition, TaskDefinition, TaskKind
from .platform import EventEnvelope, Platform, Resource, ResourceQuery

logger = logging.getLogger(__name__)

MESSAGE_KINDS = ("tip", "reminder", "capsule", "alert")

# interventionType values handled by dispatch; anything else is a basic
# action that simply completes.
Handler = Callable[["CoachingService", "CoachingSession", dict[str, str]], None]


@dataclass
class CoachingSession:
    session_id: str
    patient_id: str
    trigger_event: EventEnvelope
    engine_instances: list[EngineInstance] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    iterations: int = 0
    status: str = "running"

    @property
    def instances(self) -> list[str]:
        """Instance ids, master first, specialized in invocation order."""
        return [inst.instance_id for inst in self.engine_instances]


def schedule_tips(service: "CoachingService", session: CoachingSession, meta: dict) -> None:
    """Queue a series of future tips at evenly spaced virtual times."""
    count = int(meta.get("count", "3"))
    interval = int(meta.get("intervalSeconds", "3600"))
    now = service.clock()
    title = meta.get("title", "Tip")
    text = meta.get("evidence", "")
    for i in range(count):
        rid = service.platform.store(
            Resource(
                resource_type="Communication",
                patient_id=session.patient_id,
                code="tip",
                value={
                    "kind": "tip",
                    "title": f"{title} ({i + 1}/{count})",
                    "text": text,
                    "source_cig": "",
                    "task": "",
                },
                source_type=service.source_label,
                status="pending",
                effective_at=now + (i + 1) * interval,
                properties={"scheduled": "true"},
            )
        )
        session.outputs.append(rid)


def snooze_reminder(service: "CoachingService", session: CoachingSession, meta: dict) -> None:
    """Push the newest pending reminder to a later virtual time."""
    delay = int(meta.get("snoozeSeconds", "3600"))
    hits = service.platform.query(
        ResourceQuery(
            resource_type="Communication",
            patient_id=session.patient_id,
            code="reminder",
            status="pending",
            order="desc",
            limit=1,
        )
    )
    if not hits:
        return
    original = hits[0]
    service.platform.update_status(original.id, "expired")
    rid = service.platform.store(
        Resource(
            resource_type="Communication",
            patient_id=session.patient_id,
            code="reminder",
            value=original.value,
            source_type=service.source_label,
            status="pending",
            effective_at=service.clock() + delay,
            properties={"snoozed": "true"},
        )
    )
    session.outputs.append(rid)


DEFAULT_HANDLERS: dict[str, Handler] = {
    "schedule_tips": schedule_tips,
    "snooze_reminder": snooze_reminder,
}


class CoachingService:
    def __init__(
        self,
        platform: Platform,
        abstractions: AbstractionService | None,
        master: GuidelineDefinition | None,
        specialized: dict[str, GuidelineDefinition],
        handlers: dict[str, Handler] | None = None,
        external_data: dict[str, object] | None = None,
        clock: Callable[[], int] | None = None,
        iteration_cap: int = 1000,
        source_label: str = "system",
    ):
        self.platform = platform
        self.master = master
        self.specialized = specialized
        self.handlers = dict(DEFAULT_HANDLERS if handlers is None else handlers)
        self.clock = clock or platform.clock
        self.iteration_cap = iteration_cap
        self.source_label = source_label
        self.resolver = DataResolver(
            platform,
            abstractions,
            external_data=external_data,
            allowed_sources=("kdom", "dp", "external", "calc"),
        )
        # Test hook: when set to a list, finished instances are appended to it.
        self.instance_sink: list[EngineInstance] | None = None

    # -- session lifecycle ----------------------------------------------------

    def handle_event(self, ev: EventEnvelope) -> CoachingSession:
        session = CoachingSession(
            session_id=f"{ev.patient_id}-e{ev.seq:04d}-coaching",
            patient_id=ev.patient_id,
            trigger_event=ev,
        )
        if self.master is None:
            logger.error("no master guideline configured; aborting session")
            session.status = "aborted"
            return session
        self._enact_into(session, self.master, ev)
        self.run_session(session)
        for inst in session.engine_instances:
            terminate(inst)
            self._store_trace(inst)
            if self.instance_sink is not None:
                self.instance_sink.append(inst)
        return session

    def _enact_into(
        self, session: CoachingSession, definition: GuidelineDefinition, ev: EventEnvelope
    ) -> EngineInstance:
        index = len(session.engine_instances)
        inst = enact(
            definition,
            session.patient_id,
            instance_id=f"{session.session_id}-{index:02d}-{definition.id}",
            clock=self.clock,
            validated=True,
        )
        bindings = []
        for item in definition.data_items:
            if item.name in ev.payload:
                value = coerce_value(item.value_type, ev.payload[item.name])
                if value is not UNKNOWN:
                    bindings.append(
                        DataValueBinding(item=item.name, value=value, origin="external")
                    )
        if bindings:
            set_data_values(inst, bindings)
        session.engine_instances.append(inst)
        return inst

    def run_session(self, session: CoachingSession) -> CoachingSession:
        """Advance/dispatch loop: runs until an iteration produces no effect."""
        for iteration in range(self.iteration_cap):
            session.iterations = iteration + 1
            effects = 0
            for inst in list(session.engine_instances):
                if inst.terminated or inst.is_terminal():
                    continue
                effects += len(advance(inst))
                for task in active_tasks(inst, {TaskKind.ACTION, TaskKind.ENQUIRY}):
                    if task.kind is TaskKind.ACTION:
                        effects += self.dispatch_action(session, inst, task)
                    else:
                        effects += self.resolve_enquiry(session, inst, task)
            if effects == 0:
                session.status = (
                    "done"
                    if all(i.is_terminal() for i in session.engine_instances)
                    else "quiescent"
                )
                return session
        logger.error("session %s hit the iteration cap", session.session_id)
        session.status = "aborted"
        return session

    # -- task dispatch -----------------------------------------------------------

    def _write_message(
        self, session: CoachingSession, inst: EngineInstance, task: TaskDefinition, kind: str
    ) -> str:
        text = task.meta.get("evidence", "")
        text_item = task.meta.get("textItem")
        if text_item:
            bound = inst.value_of(text_item)
            if bound is not UNKNOWN:
                text = str(bound)
        rid = self.platform.store(
            Resource(
                resource_type="Communication",
                patient_id=session.patient_id,
                code=kind,
                value={
                    "kind": kind,
                    "title": task.meta.get("title", task.name),
                    "text": text,
                    "source_cig": inst.definition.id,
                    "task": task.name,
                },
                source_type=self.source_label,
                status="pending",
                effective_at=self.clock(),
            )
        )
        session.outputs.append(rid)
        return rid

    def dispatch_action(
        self, session: CoachingSession, inst: EngineInstance, task: TaskDefinition
    ) -> int:
        """Carry out one active action; always settles the task. Returns 1."""
        itype = task.meta.get("interventionType")
        try:
            if itype in MESSAGE_KINDS:
                self._write_message(session, inst, task, itype)
                complete_action(inst, task.name)
            elif itype == "invoke-cig":
                cig_id = task.meta.get("cigId", "")
                definition = self.specialized.get(cig_id)
                if definition is None:
                    logger.warning("unknown cigId %r; discarding task %s", cig_id, task.name)
                    discard_task(inst, task.name)
                else:
                    self._enact_into(session, definition, session.trigger_event)
                    complete_action(inst, task.name, result=cig_id)
            elif itype == "internal":
                handler_id = task.meta.get("handlerId", "")
                handler = self.handlers.get(handler_id)
                if handler is None:
                    logger.warning(
                        "unknown handlerId %r; discarding task %s", handler_id, task.name
                    )
                    discard_task(inst, task.name)
                else:
                    handler(self, session, dict(task.meta))
                    complete_action(inst, task.name, result=handler_id)
            else:
                # Basic action: nothing to mediate, just completes.
                complete_action(inst, task.name)
        except Exception:
            logger.exception("dispatch of %s failed; discarding", task.name)
            if inst.state_of(task.name) is TaskState.IN_PROGRESS:
                discard_task(inst, task.name)
        return 1

    def resolve_enquiry(
        self, session: CoachingSession, inst: EngineInstance, task: TaskDefinition
    ) -> int:
        """Bind whatever sources can be resolved now; unresolved stay unknown."""
        now = self.clock()
        bindings = []
        for source in task.sources:
            if inst.value_of(source) is not UNKNOWN:
                continue
            item = inst.definition.item_map[source]
            value = self.resolver.resolve(item, session.patient_id, now)
            if value is not UNKNOWN:
                bindings.append(
                    DataValueBinding(item=source, value=value, origin="enquiry")
                )
        if not bindings:
            return 0
        return len(set_data_values(inst, bindings))

    def _store_trace(self, inst: EngineInstance) -> None:
        records = [
            export_transition_dict(inst.instance_id, r) for r in inst.transition_log
        ]
        self.platform.append_trace(inst.instance_id, records, patient_id=inst.patient_id)
