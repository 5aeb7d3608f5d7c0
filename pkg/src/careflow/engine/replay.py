"""Re-run a recorded operation sequence against a definition.

Every runtime operation appends itself to the instance's ``op_log`` with
the clock value it ran under.  Replaying that log against another
definition (typically the same one with meta maps stripped) under the
recorded timestamps must reproduce the transition log whenever enactment
behaviour is independent of the changed parts.
"""
from __future__ import annotations

from ..model.definition import GuidelineDefinition
from .instance import DataValueBinding, EngineInstance
from . import runtime


class _ReplayClock:
    def __init__(self):
        self.value = 0

    def __call__(self) -> int:
        return self.value


def replay_ops(
    definition: GuidelineDefinition,
    op_log: list[tuple],
    instance_id: str = "replay",
    patient_id: str = "replay",
) -> EngineInstance:
    clock = _ReplayClock()
    inst: EngineInstance | None = None
    for entry in op_log:
        name, at = entry[0], entry[1]
        clock.value = at
        if name == "enact":
            inst = runtime.enact(
                definition,
                entry[2],
                instance_id=instance_id,
                decision_mode=entry[3],
                clock=clock,
                validated=True,
            )
        elif inst is None:
            raise ValueError("operation before enact in op log")
        elif name == "set":
            runtime.set_data_values(
                inst,
                [DataValueBinding(item=i, value=v, origin=o) for i, v, o in entry[2]],
            )
        elif name == "advance":
            runtime.advance(inst)
        elif name == "run_to_completion":
            runtime.run_to_completion(inst)
        elif name == "complete_action":
            runtime.complete_action(inst, entry[2], entry[3])
        elif name == "discard_task":
            runtime.discard_task(inst, entry[2])
        elif name == "commit_candidate":
            runtime.commit_candidate(inst, entry[2], entry[3])
        elif name == "close_decision":
            if inst.state_of(entry[2]).value == "in_progress":
                runtime.close_decision(inst, entry[2])
        elif name == "terminate":
            runtime.terminate(inst)
        else:
            raise ValueError(f"unknown op {name!r}")
    if inst is None:
        raise ValueError("empty op log")
    return inst
