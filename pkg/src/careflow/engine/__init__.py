"""Guideline enactment: per-instance task state machines and evaluation."""

from .evaluator import EvaluationError, evaluate, netsupport, recommendation_of
from .instance import (
    BindingTypeError,
    CompletionReport,
    DataValueBinding,
    EngineError,
    EngineInstance,
    GateViolationError,
    InstanceFrozenError,
    InvalidDefinitionError,
    ReportedAction,
    TaskInstance,
    TaskState,
    TaskStateError,
    TransitionCause,
    TransitionRecord,
    UnknownItemError,
    export_transition_dict,
    export_transition_line,
    report_of,
)
from .runtime import (
    active_tasks,
    advance,
    close_decision,
    commit_candidate,
    complete_action,
    decision_state,
    discard_task,
    enact,
    run_to_completion,
    set_data_values,
    terminate,
)
from .tristate import UNKNOWN, TriValue, is_known, tri_and, tri_not, tri_or

__all__ = [
    "BindingTypeError",
    "CompletionReport",
    "DataValueBinding",
    "EngineError",
    "EngineInstance",
    "EvaluationError",
    "GateViolationError",
    "InstanceFrozenError",
    "InvalidDefinitionError",
    "ReportedAction",
    "TaskInstance",
    "TaskState",
    "TaskStateError",
    "TransitionCause",
    "TransitionRecord",
    "TriValue",
    "UNKNOWN",
    "UnknownItemError",
    "active_tasks",
    "advance",
    "close_decision",
    "commit_candidate",
    "complete_action",
    "decision_state",
    "discard_task",
    "enact",
    "evaluate",
    "export_transition_dict",
    "export_transition_line",
    "is_known",
    "netsupport",
    "recommendation_of",
    "report_of",
    "run_to_completion",
    "set_data_values",
    "terminate",
    "tri_and",
    "tri_not",
    "tri_or",
]
