"""Shared data platform: resource repository, execution traces, event bus."""

from .journal import Journal
from .service import (
    DuplicateIdError,
    EventEnvelope,
    IllegalStatusError,
    Platform,
    PlatformError,
    RESOURCE_TYPES,
    Resource,
    ResourceQuery,
    STATUSES,
    SequenceError,
    Subscription,
    matches,
)

__all__ = [
    "DuplicateIdError",
    "EventEnvelope",
    "IllegalStatusError",
    "Journal",
    "Platform",
    "PlatformError",
    "RESOURCE_TYPES",
    "Resource",
    "ResourceQuery",
    "STATUSES",
    "SequenceError",
    "Subscription",
    "matches",
]
