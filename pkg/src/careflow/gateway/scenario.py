"""Deterministic scenario runner.

A script declares patients, pre-loaded resources, a timed event sequence,
and expectations over the final state.  Events are published in virtual
time order with barrier semantics: everything an event triggers completes
before the clock moves on, so a script is a pure function of its inputs.
Same-time events for different patients may be driven by a worker pool;
per-patient results are unaffected because all cross-component state is
patient-scoped.

The runner writes a trace report per patient (line-delimited transition
records in stable field order), a JSON report, a human-readable summary,
and rendered figures alongside them.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..platform import EventEnvelope, Resource, ResourceQuery
from .environment import Environment, EnvironmentConfig

logger = logging.getLogger(__name__)


class ScenarioError(Exception):
    """Malformed scenario script or configuration."""


@dataclass(frozen=True)
class ScriptEvent:
    at: int
    event_type: str
    patient_id: str
    payload: dict[str, str]


@dataclass(frozen=True)
class ScenarioScript:
    id: str
    patients: tuple[dict, ...]
    initial_resources: tuple[dict, ...]
    events: tuple[ScriptEvent, ...]
    expectations: tuple[dict, ...]


@dataclass
class ScenarioResult:
    passed: bool
    expectations: list[dict] = field(default_factory=list)
    out_dir: Path | None = None
    trace_paths: list[Path] = field(default_factory=list)
    figure_paths: list[Path] = field(default_factory=list)


def parse_scenario(text: str) -> ScenarioScript:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    patients = doc.get("patients", [])
    if not isinstance(patients, list) or not all(
        isinstance(p, dict) and isinstance(p.get("id"), str) for p in patients
    ):
        raise ScenarioError("patients must be objects with an id")
    events = []
    for i, raw in enumerate(doc.get("events", [])):
        if not isinstance(raw, dict):
            raise ScenarioError(f"event {i} must be an object")
        at = raw.get("at", 0)
        if not isinstance(at, int) or at < 0:
            raise ScenarioError(f"event {i}: 'at' must be a non-negative integer")
        event_type = raw.get("event_type")
        patient_id = raw.get("patient_id")
        if not isinstance(event_type, str) or not event_type:
            raise ScenarioError(f"event {i}: missing event_type")
        if not isinstance(patient_id, str) or not patient_id:
            raise ScenarioError(f"event {i}: missing patient_id")
        payload = raw.get("payload", {})
        if not isinstance(payload, dict):
            raise ScenarioError(f"event {i}: payload must be an object")
        events.append(
            ScriptEvent(at, event_type, patient_id, {k: str(v) for k, v in payload.items()})
        )
    events.sort(key=lambda e: e.at)  # stable: declaration order within a time
    return ScenarioScript(
        id=str(doc.get("id", "scenario")),
        patients=tuple(patients),
        initial_resources=tuple(doc.get("initial_resources", [])),
        events=tuple(events),
        expectations=tuple(doc.get("expectations", [])),
    )


def load_scenario(path: str | Path) -> ScenarioScript:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _seed(env: Environment, script: ScenarioScript) -> None:
    for patient in script.patients:
        env.register_patient(patient["id"], {
            k: str(v) for k, v in patient.items() if k != "id"
        })
    for raw in script.initial_resources:
        env.platform.store(
            Resource(
                resource_type=raw.get("resource_type", "Observation"),
                patient_id=raw.get("patient_id", ""),
                code=raw.get("code", ""),
                value=raw.get("value"),
                source_type=raw.get("source_type", "system"),
                status=raw.get("status", "active"),
                effective_at=raw.get("effective_at", 0),
                properties={k: str(v) for k, v in raw.get("properties", {}).items()},
                id=raw.get("id", ""),
            )
        )


# -- expectations ------------------------------------------------------------


def _match_communication(view: dict, exp: dict) -> bool:
    if "payload_kind" in exp and view.get("kind") != exp["payload_kind"]:
        return False
    if "status" in exp and view.get("status") != exp["status"]:
        return False
    if "gate" in exp and view.get("gate") != exp["gate"]:
        return False
    if "escalation" in exp and view.get("escalation") != exp["escalation"]:
        return False
    if "instruction_contains" in exp and exp["instruction_contains"] not in view.get("instruction", ""):
        return False
    if "text_contains" in exp and exp["text_contains"] not in view.get("text", ""):
        return False
    options = view.get("options", [])
    if "option_code" in exp:
        option = next((o for o in options if o.get("code") == exp["option_code"]), None)
        if option is None:
            return False
        if "option_safe" in exp and option.get("safe") != exp["option_safe"]:
            return False
        if "conflict_with" in exp and not any(
            c.get("other_code") == exp["conflict_with"] for c in option.get("conflicts", [])
        ):
            return False
        if "conflict_severity" in exp and not any(
            c.get("severity") == exp["conflict_severity"] for c in option.get("conflicts", [])
        ):
            return False
        if exp.get("option_has_explanation") and not all(
            c.get("explanation") for c in option.get("conflicts", [])
        ):
            return False
        if "option_evidence_contains" in exp and exp["option_evidence_contains"] not in option.get("evidence", ""):
            return False
    if "option_count" in exp and len(options) != exp["option_count"]:
        return False
    return True


def evaluate_expectation(env: Environment, exp: dict) -> tuple[bool, str]:
    kind = exp.get("kind")
    if kind == "communication_count":
        views = env.list_recommendations(exp["patient_id"], exp.get("status"))
        hits = [v for v in views if _match_communication(v, exp)]
        ok = len(hits) == exp.get("equals", 0)
        return ok, f"found {len(hits)}, expected {exp.get('equals', 0)}"
    if kind == "communication_exists":
        views = env.list_recommendations(exp["patient_id"], exp.get("status"))
        hits = [v for v in views if _match_communication(v, exp)]
        if exp.get("absent"):
            return (not hits), f"found {len(hits)}, expected none"
        return bool(hits), f"found {len(hits)} matching"
    if kind == "resource_count":
        hits = env.platform.query(
            ResourceQuery(
                resource_type=exp.get("resource_type", "Observation"),
                patient_id=exp["patient_id"],
                code=exp.get("code"),
                status=exp.get("status"),
            )
        )
        ok = len(hits) == exp.get("equals", 0)
        return ok, f"found {len(hits)}, expected {exp.get('equals', 0)}"
    if kind == "trace_nonempty":
        lines = env.trace_lines(exp["patient_id"])
        return bool(lines), f"{len(lines)} transition(s)"
    raise ScenarioError(f"unknown expectation kind {kind!r}")


# -- report writing -----------------------------------------------------------


def write_trace_files(env: Environment, patient_ids: list[str], traces_dir: Path) -> list[Path]:
    traces_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for patient_id in patient_ids:
        path = traces_dir / f"{patient_id}.ndjson"
        lines = env.trace_lines(patient_id)
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        paths.append(path)
    return paths


def _patient_report(env: Environment, patient_id: str) -> dict:
    communications = env.list_recommendations(patient_id)
    medications = env.platform.query(
        ResourceQuery(resource_type="MedicationStatement", patient_id=patient_id)
    )
    return {
        "communications": communications,
        "medication_statements": [
            {"id": m.id, "code": m.code, "status": m.status, "effective_at": m.effective_at}
            for m in medications
        ],
        "events": len(env.platform.events_for_patient(patient_id)),
    }


def run_scenario(
    config: EnvironmentConfig,
    script: ScenarioScript,
    out_dir: str | Path,
    *,
    figures: bool = True,
    restart_between_events: bool = False,
    workers: int = 1,
) -> ScenarioResult:
    """Drive the script to completion and write the report bundle.

    ``restart_between_events`` tears the environment down after every event
    and rebuilds it from configuration plus journal, proving that no
    component keeps load-bearing state in memory.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.journal_path is None:
        config.journal_path = out_dir / "journal.ndjson"
    Path(config.journal_path).unlink(missing_ok=True)

    env = Environment(config)
    try:
        _seed(env, script)

        position = 0
        events = list(script.events)
        while position < len(events):
            if restart_between_events:
                env.clock.advance_to(events[position].at)
                _publish(env, events[position])
                position += 1
                env.close()
                env = Environment(config)
                continue
            # Barrier group: everything at one virtual time.
            at = events[position].at
            group = []
            while position < len(events) and events[position].at == at:
                group.append(events[position])
                position += 1
            env.clock.advance_to(at)
            by_patient: dict[str, list[ScriptEvent]] = {}
            for ev in group:
                by_patient.setdefault(ev.patient_id, []).append(ev)
            if workers > 1 and len(by_patient) > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    list(
                        pool.map(
                            lambda queue: [_publish(env, ev) for ev in queue],
                            by_patient.values(),
                        )
                    )
            else:
                for ev in group:
                    _publish(env, ev)

        patient_ids = [p["id"] for p in script.patients]
        result = ScenarioResult(passed=True, out_dir=out_dir)
        result.trace_paths = write_trace_files(env, patient_ids, out_dir / "traces")

        for exp in script.expectations:
            try:
                ok, detail = evaluate_expectation(env, exp)
            except KeyError as exc:
                raise ScenarioError(f"expectation missing field: {exc}") from exc
            result.expectations.append(
                {
                    "expectation": exp,
                    "passed": ok,
                    "detail": detail,
                }
            )
            if not ok:
                result.passed = False

        report = {
            "scenario": script.id,
            "patients": {pid: _patient_report(env, pid) for pid in patient_ids},
            "expectations": result.expectations,
            "passed": result.passed,
        }
        (out_dir / "report.json").write_text(
            json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        summary_lines = [
            f"scenario: {script.id}",
            f"patients: {len(patient_ids)}  events: {len(script.events)}",
        ]
        for entry in result.expectations:
            status = "PASS" if entry["passed"] else "FAIL"
            summary_lines.append(
                f"[{status}] {json.dumps(entry['expectation'], sort_keys=True)} -- {entry['detail']}"
            )
        summary_lines.append("result: " + ("PASS" if result.passed else "FAIL"))
        (out_dir / "summary.txt").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")

        if figures:
            from .figures import render_report_figures

            result.figure_paths = render_report_figures(env, patient_ids, out_dir / "figures")
        return result
    finally:
        env.close()


def _publish(env: Environment, ev: ScriptEvent) -> None:
    env.post_event(
        EventEnvelope(
            event_type=ev.event_type,
            patient_id=ev.patient_id,
            payload=ev.payload,
            at=ev.at,
        )
    )
