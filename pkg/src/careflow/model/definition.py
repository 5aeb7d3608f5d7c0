"""Task-network guideline definitions.

A guideline is a tree of plans whose leaves are actions, enquiries, and
decisions, plus the data items those tasks read.  Tasks and data items carry
an open key/value meta map: the enactment engine ignores it (except the
decision ``gate`` in automatic commit mode), while surrounding services use
it to drive data collection and recommendation routing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from .expressions import Expression


class TaskKind(str, Enum):
    PLAN = "plan"
    ACTION = "action"
    ENQUIRY = "enquiry"
    DECISION = "decision"


class ValueType(str, Enum):
    BOOLEAN = "boolean"
    INTEGER = "integer"
    REAL = "real"
    TEXT = "text"
    CODE = "code"


MetaMap = dict[str, str]

# Keys with defined behaviour somewhere in the system. Anything else is
# preserved verbatim: the registry is open.
RECOGNIZED_ITEM_META = (
    "sourceType",      # component that created the source resource
    "resourceType",    # resource type to read values from
    "valueExpression", # property of the resource to report
    "source",          # resolver: kdom | dp | external | calc
    "abstractionId",   # abstraction rule to compute (source=kdom)
    "codeQuery",       # resource code filter (source=dp)
    "calcId",          # named calculation (source=calc)
    "externalKey",     # key into the external stub store (source=external)
)
RECOGNIZED_TASK_META = (
    "interventionType",  # tip | reminder | alert | capsule | medication-proposal | invoke-cig | internal
    "gate",              # AND | OR | XOR, on decisions
    "cigId",             # guideline to invoke (interventionType=invoke-cig)
    "handlerId",         # internal handler to run (interventionType=internal)
    "decisionRef",       # decision a proposal option belongs to
    "medicationCode",    # medication proposed by the task
    "title",
    "evidence",
    "textItem",          # data item whose bound value becomes the message body
)

GATE_VALUES = ("AND", "OR", "XOR")


@dataclass(frozen=True)
class Argument:
    """Weighted condition for or against a decision candidate."""

    condition: Expression
    weight: int


@dataclass(frozen=True)
class Candidate:
    name: str
    arguments: tuple[Argument, ...]
    recommend_expr: Expression | None = None  # default rule: netsupport >= 1
    meta: MetaMap = field(default_factory=dict)


@dataclass(frozen=True)
class TaskDefinition:
    name: str
    kind: TaskKind
    components: tuple[str, ...] = ()
    antecedents: tuple[str, ...] = ()
    precondition: Expression | None = None
    sources: tuple[str, ...] = ()
    candidates: tuple[Candidate, ...] = ()
    procedure: str | None = None
    meta: MetaMap = field(default_factory=dict)


@dataclass(frozen=True)
class DataItemDefinition:
    name: str
    value_type: ValueType
    meta: MetaMap = field(default_factory=dict)


def get_meta(element: TaskDefinition | DataItemDefinition | Candidate, key: str) -> str | None:
    """Read a meta value without touching the element; None when absent."""
    return element.meta.get(key)


@dataclass(frozen=True)
class GuidelineDefinition:
    id: str
    version: str
    description: str
    data_items: tuple[DataItemDefinition, ...]
    tasks: tuple[TaskDefinition, ...]
    root_plan: str

    @cached_property
    def task_map(self) -> dict[str, TaskDefinition]:
        return {t.name: t for t in self.tasks}

    @cached_property
    def item_map(self) -> dict[str, DataItemDefinition]:
        return {d.name: d for d in self.data_items}

    @cached_property
    def parent_of(self) -> dict[str, str]:
        """Task name -> containing plan name (root plan absent)."""
        parents: dict[str, str] = {}
        for task in self.tasks:
            for child in task.components:
                parents.setdefault(child, task.name)
        return parents

    @cached_property
    def candidate_index(self) -> dict[str, tuple[str, Candidate]]:
        """Candidate name -> (decision task name, candidate).

        First declaration wins when a name repeats across decisions.
        """
        index: dict[str, tuple[str, Candidate]] = {}
        for task in self.tasks:
            for cand in task.candidates:
                index.setdefault(cand.name, (task.name, cand))
        return index

    def task(self, name: str) -> TaskDefinition:
        return self.task_map[name]

    def without_meta(self) -> "GuidelineDefinition":
        """Copy of the definition with every meta map emptied.

        Used to check that enactment behaviour does not depend on meta.
        """
        items = tuple(
            DataItemDefinition(d.name, d.value_type, {}) for d in self.data_items
        )
        tasks = []
        for t in self.tasks:
            candidates = tuple(
                Candidate(c.name, c.arguments, c.recommend_expr, {}) for c in t.candidates
            )
            tasks.append(
                TaskDefinition(
                    name=t.name,
                    kind=t.kind,
                    components=t.components,
                    antecedents=t.antecedents,
                    precondition=t.precondition,
                    sources=t.sources,
                    candidates=candidates,
                    procedure=t.procedure,
                    meta={},
                )
            )
        return GuidelineDefinition(
            id=self.id,
            version=self.version,
            description=self.description,
            data_items=items,
            tasks=tuple(tasks),
            root_plan=self.root_plan,
        )
