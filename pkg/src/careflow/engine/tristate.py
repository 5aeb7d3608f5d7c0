"""Three-valued (Kleene) truth values.

Truth values are plain ``True``/``False`` plus the ``UNKNOWN`` singleton.
Connectives follow strong Kleene semantics: a missing operand only decides
the result when no possible value could change it.
"""
from __future__ import annotations


class _Unknown:
    """Singleton marker for a value that is not (yet) known."""

    _instance: "_Unknown | None" = None

    def __new__(cls) -> "_Unknown":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNKNOWN"

    def __bool__(self) -> bool:
        raise TypeError("UNKNOWN has no boolean value; use tri_and/tri_or/tri_not")


UNKNOWN = _Unknown()

TriValue = bool | _Unknown


def is_known(value: object) -> bool:
    return value is not UNKNOWN


def tri_and(left: TriValue, right: TriValue) -> TriValue:
    if left is False or right is False:
        return False
    if left is UNKNOWN or right is UNKNOWN:
        return UNKNOWN
    return True


def tri_or(left: TriValue, right: TriValue) -> TriValue:
    if left is True or right is True:
        return True
    if left is UNKNOWN or right is UNKNOWN:
        return UNKNOWN
    return False


def tri_not(value: TriValue) -> TriValue:
    if value is UNKNOWN:
        return UNKNOWN
    return not value
