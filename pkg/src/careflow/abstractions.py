"""Derived values computed on demand from stored data.

A rule names an output data item, a resource query template, an optional
look-back window, an aggregator, and an optional threshold mapping that
turns a raw number into an ordinal (for example, recent peak temperature
into a severity grade).  Rules are declarative data loaded from JSON files,
so new derivations need no code changes.

Computation is pure: it reads the platform, never writes it, and takes
"now" as an argument so replays are exact.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .engine.tristate import UNKNOWN
from .platform import Platform, ResourceQuery

logger = logging.getLogger(__name__)

AGGREGATORS = ("latest", "max", "min", "count", "exists")

_OLDEST = -(2**62)


class AbstractionError(Exception):
    pass


@dataclass(frozen=True)
class ThresholdMapping:
    """Ordered (threshold, mapped value) steps plus the below-range floor.

    A value maps to the entry with the greatest threshold not exceeding it;
    values below the lowest threshold map to the floor.
    """

    floor: object
    thresholds: tuple[tuple[float, object], ...]

    def apply(self, value) -> object:
        mapped = self.floor
        for threshold, out in self.thresholds:
            if value >= threshold:
                mapped = out
            else:
                break
        return mapped


@dataclass(frozen=True)
class AbstractionRule:
    id: str
    output_item: str
    resource_type: str
    code: str | None = None
    source_type: str | None = None
    status: str | None = None
    window: int | None = None  # seconds of look-back before "now"
    aggregator: str = "latest"
    mapping: ThresholdMapping | None = None


@dataclass(frozen=True)
class AbstractionResult:
    value: object  # typed value, or UNKNOWN when nothing matched the window
    inputs_used: tuple[str, ...] = ()
    computed_at: int = 0


def _numeric(value, rule_id: str):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    raise AbstractionError(f"rule {rule_id!r}: non-numeric input value {value!r}")


class AbstractionService:
    def __init__(self, platform: Platform):
        self.platform = platform
        self._by_id: dict[str, AbstractionRule] = {}
        self._by_item: dict[str, AbstractionRule] = {}

    def register_rule(self, rule: AbstractionRule) -> bool:
        if rule.id in self._by_id:
            raise AbstractionError(f"duplicate rule id {rule.id!r}")
        if rule.aggregator not in AGGREGATORS:
            raise AbstractionError(f"rule {rule.id!r}: unknown aggregator {rule.aggregator!r}")
        if rule.mapping is not None:
            if rule.aggregator == "exists":
                raise AbstractionError(f"rule {rule.id!r}: mapping does not apply to exists")
            steps = [t for t, _ in rule.mapping.thresholds]
            if any(b <= a for a, b in zip(steps, steps[1:])):
                raise AbstractionError(
                    f"rule {rule.id!r}: thresholds must be strictly increasing"
                )
        self._by_id[rule.id] = rule
        # First registration wins for by-item resolution.
        self._by_item.setdefault(rule.output_item, rule)
        return True

    def rule_for(self, rule_id_or_item: str) -> AbstractionRule | None:
        return self._by_id.get(rule_id_or_item) or self._by_item.get(rule_id_or_item)

    def compute(self, rule_id_or_item: str, patient_id: str, now: int) -> AbstractionResult:
        rule = self.rule_for(rule_id_or_item)
        if rule is None:
            raise AbstractionError(f"no abstraction rule for {rule_id_or_item!r}")
        lo = now - rule.window if rule.window is not None else _OLDEST
        hits = self.platform.query(
            ResourceQuery(
                resource_type=rule.resource_type,
                patient_id=patient_id,
                code=rule.code,
                source_type=rule.source_type,
                status=rule.status,
                window=(lo, now),
            )
        )
        if not hits:
            return AbstractionResult(UNKNOWN, (), now)
        inputs = tuple(r.id for r in hits)
        if rule.aggregator == "latest":
            value = hits[-1].value
        elif rule.aggregator == "count":
            value = len(hits)
        elif rule.aggregator == "exists":
            value = True
        elif rule.aggregator == "max":
            value = max(_numeric(r.value, rule.id) for r in hits)
        else:
            value = min(_numeric(r.value, rule.id) for r in hits)
        if rule.mapping is not None:
            value = rule.mapping.apply(_numeric(value, rule.id))
        return AbstractionResult(value, inputs, now)


def _rule_from_json(raw: dict) -> AbstractionRule:
    mapping = None
    if "mapping" in raw:
        m = raw["mapping"]
        mapping = ThresholdMapping(
            floor=m.get("floor"),
            thresholds=tuple((float(t), v) for t, v in m.get("thresholds", [])),
        )
    query = raw.get("query", {})
    return AbstractionRule(
        id=raw["id"],
        output_item=raw["output_item"],
        resource_type=query.get("resource_type", "Observation"),
        code=query.get("code"),
        source_type=query.get("source_type"),
        status=query.get("status"),
        window=raw.get("window"),
        aggregator=raw.get("aggregator", "latest"),
        mapping=mapping,
    )


def load_rules(service: AbstractionService, path: str | Path) -> int:
    """Load rule files (one JSON list per file; a directory loads *.json)."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    count = 0
    for file in files:
        for raw in json.loads(file.read_text(encoding="utf-8")):
            service.register_rule(_rule_from_json(raw))
            count += 1
    return count
