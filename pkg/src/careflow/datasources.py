"""Meta-property driven resolution of guideline data items.

Each data item's ``source`` meta key picks the resolver:

* ``kdom``  — compute the abstraction named by ``abstractionId`` (defaults
  to the item name);
* ``dp``    — read the newest matching repository resource, filtered by the
  ``resourceType`` / ``codeQuery`` / ``sourceType`` metas, taking the
  property named by ``valueExpression`` (or the resource value itself);
* ``calc``  — run the named calculation against the virtual clock;
* ``external`` — look up the stub store shipped for side data sources such
  as prevention-tip repositories.

Anything unresolvable stays unknown: absence of data is a normal state for
a guideline, never an error.
"""
from __future__ import annotations

import logging
from typing import Callable

from .abstractions import AbstractionError, AbstractionService
from .engine.tristate import UNKNOWN
from .model.definition import DataItemDefinition, ValueType
from .platform import Platform, ResourceQuery

logger = logging.getLogger(__name__)


def coerce_value(value_type: ValueType, raw: object) -> object:
    """Best-effort conversion of repository payloads to a declared item type."""
    if raw is None:
        return UNKNOWN
    try:
        if value_type is ValueType.BOOLEAN:
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, str) and raw.lower() in ("true", "false"):
                return raw.lower() == "true"
        elif value_type is ValueType.INTEGER:
            if isinstance(raw, bool):
                return UNKNOWN
            if isinstance(raw, (int, str, float)):
                return int(raw)
        elif value_type is ValueType.REAL:
            if isinstance(raw, bool):
                return UNKNOWN
            if isinstance(raw, (int, float, str)):
                return float(raw)
        else:
            if isinstance(raw, str):
                return raw
    except (TypeError, ValueError):
        pass
    logger.warning("cannot coerce %r to %s; leaving unknown", raw, value_type.value)
    return UNKNOWN


def _calc_hour_of_day(now: int) -> int:
    return (now % 86400) // 3600


def _calc_day_of_week(now: int) -> int:
    return (now // 86400) % 7


def _calc_now_seconds(now: int) -> int:
    return now


CALCULATIONS: dict[str, Callable[[int], object]] = {
    "hour_of_day": _calc_hour_of_day,
    "day_of_week": _calc_day_of_week,
    "now_seconds": _calc_now_seconds,
}


class DataResolver:
    def __init__(
        self,
        platform: Platform,
        abstractions: AbstractionService | None = None,
        external_data: dict[str, object] | None = None,
        allowed_sources: tuple[str, ...] = ("kdom", "dp"),
    ):
        self.platform = platform
        self.abstractions = abstractions
        self.external_data = external_data or {}
        self.allowed_sources = allowed_sources

    def resolve(self, item: DataItemDefinition, patient_id: str, now: int) -> object:
        """Value for one item, or UNKNOWN. Never raises for missing data."""
        source = item.meta.get("source")
        if source is None:
            return UNKNOWN
        if source not in self.allowed_sources:
            logger.warning(
                "item %s: source %r not available in this context", item.name, source
            )
            return UNKNOWN
        try:
            if source == "kdom":
                return self._from_abstraction(item, patient_id, now)
            if source == "dp":
                return self._from_repository(item, patient_id)
            if source == "calc":
                return self._from_calculation(item, now)
            return self._from_external(item, now)
        except Exception:
            logger.exception("resolver %s failed for item %s", source, item.name)
            return UNKNOWN

    def _from_abstraction(self, item, patient_id: str, now: int) -> object:
        if self.abstractions is None:
            return UNKNOWN
        key = item.meta.get("abstractionId", item.name)
        try:
            result = self.abstractions.compute(key, patient_id, now)
        except AbstractionError as exc:
            logger.warning("abstraction %s failed: %s", key, exc)
            return UNKNOWN
        if result.value is UNKNOWN:
            return UNKNOWN
        return coerce_value(item.value_type, result.value)

    def _from_repository(self, item, patient_id: str) -> object:
        hits = self.platform.query(
            ResourceQuery(
                resource_type=item.meta.get("resourceType", "Observation"),
                patient_id=patient_id,
                code=item.meta.get("codeQuery"),
                source_type=item.meta.get("sourceType"),
                order="desc",
                limit=1,
            )
        )
        if not hits:
            return UNKNOWN
        resource = hits[0]
        expr = item.meta.get("valueExpression")
        if expr is None or expr == "value":
            raw = resource.value
        else:
            raw = resource.properties.get(expr)
        if raw is None:
            return UNKNOWN
        return coerce_value(item.value_type, raw)

    def _from_calculation(self, item, now: int) -> object:
        calc = CALCULATIONS.get(item.meta.get("calcId", item.name))
        if calc is None:
            logger.warning("item %s: unknown calculation", item.name)
            return UNKNOWN
        return coerce_value(item.value_type, calc(now))

    def _from_external(self, item, now: int) -> object:
        key = item.meta.get("externalKey", item.name)
        if key not in self.external_data:
            return UNKNOWN
        value = self.external_data[key]
        if isinstance(value, list):
            if not value:
                return UNKNOWN
            value = value[_calc_day_of_week(now) % len(value)]
        return coerce_value(item.value_type, value)
