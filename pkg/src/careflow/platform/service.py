"""Resource repository and patient-scoped event bus.

The repository stores FHIR-shaped records (five resource types with a flat
property map) plus per-instance execution traces.  The bus delivers events
synchronously to subscribers, serialized per patient so one patient's
events are always handled in publication order while different patients
proceed in parallel.

Everything that matters is journaled; a restarted process rebuilds its
maps by replaying the journal and continues with the same identifiers and
sequence numbers.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

from .journal import Journal

logger = logging.getLogger(__name__)

RESOURCE_TYPES = (
    "Patient",
    "Observation",
    "Communication",
    "MedicationStatement",
    "MedicationRequest",
)

STATUSES = ("active", "pending", "accepted", "rejected", "expired", "completed")

# Monotone status lifecycle; anything not listed is terminal.
_LEGAL_STATUS_MOVES = {
    "pending": ("accepted", "rejected", "expired"),
    "active": ("completed", "expired"),
}


class PlatformError(Exception):
    pass


class DuplicateIdError(PlatformError):
    pass


class IllegalStatusError(PlatformError):
    pass


class SequenceError(PlatformError):
    pass


@dataclass(frozen=True)
class Resource:
    resource_type: str
    patient_id: str
    code: str = ""
    value: object = None
    source_type: str = ""
    status: str = "active"
    effective_at: int | None = None
    properties: dict[str, str] = field(default_factory=dict)
    id: str = ""


@dataclass(frozen=True)
class ResourceQuery:
    resource_type: str
    patient_id: str
    code: str | None = None
    source_type: str | None = None
    status: str | None = None
    window: tuple[int, int] | None = None  # (from, to]: from exclusive, to inclusive
    limit: int | None = None
    order: str = "asc"  # by (effective_at, storage order)


@dataclass(frozen=True)
class EventEnvelope:
    event_type: str
    patient_id: str
    payload: dict[str, str] = field(default_factory=dict)
    at: int | None = None
    event_id: str = ""
    seq: int = 0


@dataclass(frozen=True)
class Subscription:
    subscriber_id: str
    event_types: frozenset[str]


def matches(resource: Resource, query: ResourceQuery) -> bool:
    """Filter predicate shared by the store and the test oracle."""
    if resource.resource_type != query.resource_type:
        return False
    if resource.patient_id != query.patient_id:
        return False
    if query.code is not None and resource.code != query.code:
        return False
    if query.source_type is not None and resource.source_type != query.source_type:
        return False
    if query.status is not None and resource.status != query.status:
        return False
    if query.window is not None:
        lo, hi = query.window
        at = resource.effective_at or 0
        if not (lo < at <= hi):
            return False
    return True


class Platform:
    """Shared repository + event bus with an append-only journal."""

    def __init__(
        self,
        journal_path=None,
        clock: Callable[[], int] | None = None,
        fsync: bool = False,
    ):
        self.clock = clock or (lambda: 0)
        self._journal = Journal(journal_path, fsync=fsync)
        self._lock = threading.RLock()
        self._resources: dict[str, Resource] = {}
        self._storage_order: dict[str, int] = {}
        self._insert_counter = 0
        self._resource_counters: dict[str, int] = {}
        self._traces: dict[str, list[dict]] = {}
        self._trace_patients: dict[str, str] = {}
        self._patient_instances: dict[str, list[str]] = {}
        self._event_seq: dict[str, int] = {}
        self._event_archive: list[EventEnvelope] = []
        self._subscriptions: dict[str, tuple[Subscription, Callable]] = {}
        self._sub_order: list[str] = []
        self._patient_locks: dict[str, threading.Lock] = {}
        self._replay()

    # -- journal replay -----------------------------------------------------

    def _replay(self) -> None:
        for record in self._journal.replay():
            kind = record.get("kind")
            if kind == "resource":
                res = Resource(
                    resource_type=record["resource_type"],
                    patient_id=record["patient_id"],
                    code=record["code"],
                    value=record["value"],
                    source_type=record["source_type"],
                    status=record["status"],
                    effective_at=record["effective_at"],
                    properties=record["properties"],
                    id=record["id"],
                )
                self._insert(res)
            elif kind == "status":
                res = self._resources[record["id"]]
                self._resources[record["id"]] = replace(res, status=record["status"])
            elif kind == "trace":
                self._trace_insert(
                    record["patient_id"], record["instance_id"], record["record"]
                )
            elif kind == "event":
                env = EventEnvelope(
                    event_type=record["event_type"],
                    patient_id=record["patient_id"],
                    payload=record["payload"],
                    at=record["at"],
                    event_id=record["event_id"],
                    seq=record["seq"],
                )
                self._event_archive.append(env)
                self._event_seq[env.patient_id] = max(
                    self._event_seq.get(env.patient_id, 0), env.seq
                )

    # -- resources ----------------------------------------------------------

    def _insert(self, res: Resource) -> None:
        self._resources[res.id] = res
        self._insert_counter += 1
        self._storage_order[res.id] = self._insert_counter
        prefix = f"{res.patient_id}-r"
        if res.id.startswith(prefix):
            suffix = res.id[len(prefix):]
            if suffix.isdigit():
                key = res.patient_id
                self._resource_counters[key] = max(
                    self._resource_counters.get(key, 0), int(suffix)
                )

    def store(self, res: Resource) -> str:
        if res.resource_type not in RESOURCE_TYPES:
            raise PlatformError(f"unknown resource type {res.resource_type!r}")
        if res.status not in STATUSES:
            raise PlatformError(f"unknown status {res.status!r}")
        if res.resource_type != "Patient" and not res.patient_id:
            raise PlatformError(f"{res.resource_type} requires a patient_id")
        with self._lock:
            rid = res.id
            if not rid:
                n = self._resource_counters.get(res.patient_id, 0) + 1
                self._resource_counters[res.patient_id] = n
                rid = f"{res.patient_id}-r{n:04d}"
            elif rid in self._resources:
                raise DuplicateIdError(f"resource id {rid!r} already stored")
            if rid in self._resources:
                raise DuplicateIdError(f"resource id {rid!r} already stored")
            stored = replace(
                res,
                id=rid,
                effective_at=res.effective_at if res.effective_at is not None else self.clock(),
                properties=dict(res.properties),
            )
            self._insert(stored)
            self._journal.append(
                {
                    "kind": "resource",
                    "id": stored.id,
                    "resource_type": stored.resource_type,
                    "patient_id": stored.patient_id,
                    "code": stored.code,
                    "value": stored.value,
                    "source_type": stored.source_type,
                    "status": stored.status,
                    "effective_at": stored.effective_at,
                    "properties": stored.properties,
                }
            )
            return stored.id

    def get(self, resource_id: str) -> Resource | None:
        with self._lock:
            return self._resources.get(resource_id)

    def query(self, q: ResourceQuery) -> list[Resource]:
        with self._lock:
            hits = [r for r in self._resources.values() if matches(r, q)]
            hits.sort(
                key=lambda r: (r.effective_at or 0, self._storage_order[r.id]),
                reverse=(q.order == "desc"),
            )
            if q.limit is not None:
                hits = hits[: q.limit]
            return hits

    def update_status(self, resource_id: str, new_status: str) -> Resource:
        if new_status not in STATUSES:
            raise PlatformError(f"unknown status {new_status!r}")
        with self._lock:
            res = self._resources.get(resource_id)
            if res is None:
                raise PlatformError(f"no resource {resource_id!r}")
            allowed = _LEGAL_STATUS_MOVES.get(res.status, ())
            if new_status not in allowed:
                raise IllegalStatusError(
                    f"illegal status transition {res.status} -> {new_status}"
                )
            updated = replace(res, status=new_status)
            self._resources[resource_id] = updated
            self._journal.append(
                {"kind": "status", "id": resource_id, "status": new_status, "at": self.clock()}
            )
            return updated

    def has_patient(self, patient_id: str) -> bool:
        with self._lock:
            res = self._resources.get(patient_id)
            return res is not None and res.resource_type == "Patient"

    def patient_ids(self) -> list[str]:
        with self._lock:
            return [
                r.id
                for r in sorted(
                    self._resources.values(), key=lambda r: self._storage_order[r.id]
                )
                if r.resource_type == "Patient"
            ]

    # -- execution traces ----------------------------------------------------

    def _trace_insert(self, patient_id: str, instance_id: str, record: dict) -> None:
        if instance_id not in self._traces:
            self._traces[instance_id] = []
            self._trace_patients[instance_id] = patient_id
            self._patient_instances.setdefault(patient_id, []).append(instance_id)
        self._traces[instance_id].append(record)

    def append_trace(
        self, instance_id: str, records: Iterable[dict], patient_id: str = ""
    ) -> int:
        """Durably append transition records (dicts in export field order)."""
        records = list(records)
        with self._lock:
            existing = self._traces.get(instance_id, [])
            last = existing[-1]["seq"] if existing else 0
            count = 0
            for record in records:
                if record["seq"] <= last:
                    raise SequenceError(
                        f"trace seq regression for {instance_id!r}: "
                        f"{record['seq']} after {last}"
                    )
                last = record["seq"]
                self._trace_insert(patient_id, instance_id, record)
                self._journal.append(
                    {
                        "kind": "trace",
                        "patient_id": patient_id,
                        "instance_id": instance_id,
                        "record": record,
                    }
                )
                count += 1
            return count

    def get_trace(self, instance_id: str) -> list[dict]:
        with self._lock:
            return list(self._traces.get(instance_id, []))

    def instances_for_patient(self, patient_id: str) -> list[str]:
        with self._lock:
            return list(self._patient_instances.get(patient_id, []))

    # -- events ---------------------------------------------------------------

    def subscribe(
        self,
        sub: Subscription,
        handler: Callable[[EventEnvelope], None],
    ) -> bool:
        """Register for future events; no replay of the archive."""
        with self._lock:
            if sub.subscriber_id in self._subscriptions:
                raise DuplicateIdError(f"subscriber {sub.subscriber_id!r} already registered")
            self._subscriptions[sub.subscriber_id] = (sub, handler)
            self._sub_order.append(sub.subscriber_id)
            return True

    def _patient_lock(self, patient_id: str) -> threading.Lock:
        with self._lock:
            lock = self._patient_locks.get(patient_id)
            if lock is None:
                lock = threading.Lock()
                self._patient_locks[patient_id] = lock
            return lock

    def publish(self, ev: EventEnvelope) -> int:
        """Assign the per-patient sequence number and deliver synchronously.

        Delivery for one patient happens under that patient's lock, so a
        subscriber sees one patient's events strictly in order even when
        many patients publish at once.
        """
        if not ev.event_type:
            raise PlatformError("event_type must be nonempty")
        patient_lock = self._patient_lock(ev.patient_id)
        with patient_lock:
            with self._lock:
                seq = self._event_seq.get(ev.patient_id, 0) + 1
                self._event_seq[ev.patient_id] = seq
                envelope = replace(
                    ev,
                    seq=seq,
                    at=ev.at if ev.at is not None else self.clock(),
                    event_id=ev.event_id or f"{ev.patient_id}-e{seq:04d}",
                )
                self._event_archive.append(envelope)
                self._journal.append(
                    {
                        "kind": "event",
                        "event_id": envelope.event_id,
                        "event_type": envelope.event_type,
                        "patient_id": envelope.patient_id,
                        "payload": envelope.payload,
                        "at": envelope.at,
                        "seq": envelope.seq,
                    }
                )
                targets = [
                    (sub, handler)
                    for sid in self._sub_order
                    for sub, handler in (self._subscriptions[sid],)
                    if envelope.event_type in sub.event_types
                ]
            for sub, handler in targets:
                try:
                    handler(envelope)
                except Exception:
                    logger.exception(
                        "subscriber %s failed on event %s", sub.subscriber_id, envelope.event_id
                    )
            return seq

    def events_for_patient(self, patient_id: str) -> list[EventEnvelope]:
        with self._lock:
            return [e for e in self._event_archive if e.patient_id == patient_id]

    def close(self) -> None:
        self._journal.close()
