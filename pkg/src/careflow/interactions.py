"""Medication conflict checking and gate-aware proposal mitigation.

Proposed medications are checked pairwise against an interaction knowledge
base, both against the patient's active medications and against pending
proposals issued by other guidelines.  Options are annotated, never
removed: the clinician sees every option with its safety flag, conflicts,
explanations, and guideline evidence, plus an instruction derived from the
decision's logical gate (AND: follow all, OR: at least one, XOR: exactly
one).  When the gate cannot be satisfied by safe options the result is
marked for escalation.

The knowledge base is a local file so runs are offline and repeatable; a
remote lookup client can be plugged in through the same interface.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .platform import Platform, ResourceQuery

logger = logging.getLogger(__name__)

SEVERITIES = ("minor", "moderate", "major")

GATES = ("AND", "OR", "XOR")


class InteractionKBError(Exception):
    pass


@dataclass(frozen=True)
class InteractionRecord:
    drug_a: str
    drug_b: str
    severity: str
    description: str


@dataclass(frozen=True)
class Conflict:
    other_code: str
    severity: str
    description: str
    origin: str  # active-medication | other-guideline
    explanation: str


@dataclass(frozen=True)
class ProposalOption:
    medication_code: str
    action_task: str
    evidence: str = ""


@dataclass(frozen=True)
class MedicationProposal:
    patient_id: str
    source_cig: str
    decision_task: str
    gate: str = "AND"
    options: tuple[ProposalOption, ...] = ()


@dataclass(frozen=True)
class ReviewedOption:
    medication_code: str
    action_task: str
    safe: bool
    conflicts: tuple[Conflict, ...]
    evidence: str


@dataclass(frozen=True)
class GateFormat:
    instruction: str
    required: int
    allowed: int
    escalation: bool


@dataclass(frozen=True)
class RevisedRecommendation:
    patient_id: str
    source_cig: str
    decision_task: str
    gate: str
    options: tuple[ReviewedOption, ...]
    instruction: str
    required: int
    allowed: int
    escalation: bool


class InteractionKB:
    """Symmetric pairwise lookup table of drug-drug interactions."""

    def __init__(self):
        self._pairs: dict[frozenset[str], InteractionRecord] = {}

    def __len__(self) -> int:
        return len(self._pairs)

    def add(self, record: InteractionRecord) -> None:
        key = frozenset((record.drug_a.lower(), record.drug_b.lower()))
        if key in self._pairs:
            raise InteractionKBError(
                f"duplicate interaction pair ({record.drug_a}, {record.drug_b})"
            )
        self._pairs[key] = record

    def lookup(self, drug_a: str, drug_b: str) -> InteractionRecord | None:
        return self._pairs.get(frozenset((drug_a.lower(), drug_b.lower())))


def load_interaction_kb(path: str | Path) -> InteractionKB:
    """Read the CSV knowledge base: drug_a,drug_b,severity,description."""
    kb = InteractionKB()
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise InteractionKBError(f"line {lineno}: expected 4 fields, got {len(row)}")
            drug_a, drug_b, severity, description = (f.strip() for f in row)
            if severity not in SEVERITIES:
                raise InteractionKBError(f"line {lineno}: unknown severity {severity!r}")
            if not drug_a or not drug_b:
                raise InteractionKBError(f"line {lineno}: empty drug code")
            kb.add(InteractionRecord(drug_a, drug_b, severity, description))
    return kb


def format_by_gate(options: list[bool] | tuple[bool, ...], gate: str) -> GateFormat:
    """Instruction plus required/allowed counts for a list of safety flags."""
    if not options:
        raise ValueError("at least one option is required")
    if gate not in GATES:
        raise ValueError(f"unknown gate {gate!r}")
    total = len(options)
    safe = sum(1 for s in options if s)
    if gate == "AND":
        return GateFormat(
            instruction=f"follow all {total} options",
            required=total,
            allowed=total,
            escalation=safe < total,
        )
    if gate == "OR":
        return GateFormat(
            instruction="follow at least one safe option",
            required=1,
            allowed=safe,
            escalation=safe == 0,
        )
    return GateFormat(
        instruction="choose exactly one option",
        required=1,
        allowed=1,
        escalation=safe == 0,
    )


class ConflictMitigator:
    """Annotates medication proposals with interaction findings."""

    def __init__(self, kb: InteractionKB, platform: Platform):
        self.kb = kb
        self.platform = platform

    def check_option(
        self,
        patient_id: str,
        medication: str,
        exclude_source_cig: str | None = None,
    ) -> list[Conflict]:
        """Conflicts against active medications and other guidelines' pending proposals."""
        conflicts: list[Conflict] = []
        active = self.platform.query(
            ResourceQuery(
                resource_type="MedicationStatement",
                patient_id=patient_id,
                status="active",
            )
        )
        for res in active:
            hit = self.kb.lookup(medication, res.code)
            if hit is not None:
                conflicts.append(
                    Conflict(
                        other_code=res.code,
                        severity=hit.severity,
                        description=hit.description,
                        origin="active-medication",
                        explanation=(
                            f"{medication} interacts with active medication "
                            f"{res.code} ({hit.severity}): {hit.description}"
                        ),
                    )
                )
        pending = self.platform.query(
            ResourceQuery(
                resource_type="Communication",
                patient_id=patient_id,
                status="pending",
            )
        )
        for res in pending:
            payload = res.value if isinstance(res.value, dict) else {}
            if payload.get("kind") != "proposal":
                continue
            other_cig = payload.get("source_cig", "")
            if exclude_source_cig is not None and other_cig == exclude_source_cig:
                continue
            for option in payload.get("options", []):
                code = option.get("code", "")
                hit = self.kb.lookup(medication, code)
                if hit is not None:
                    conflicts.append(
                        Conflict(
                            other_code=code,
                            severity=hit.severity,
                            description=hit.description,
                            origin="other-guideline",
                            explanation=(
                                f"{medication} interacts with {code} proposed by "
                                f"{other_cig or 'another guideline'} ({hit.severity}): "
                                f"{hit.description}"
                            ),
                        )
                    )
        return conflicts

    def mitigate(self, proposal: MedicationProposal) -> RevisedRecommendation:
        """Check every option, attach evidence and explanations, apply the gate.

        The option multiset is preserved: unsafe options are flagged and
        explained, not dropped.
        """
        reviewed: list[ReviewedOption] = []
        for option in proposal.options:
            conflicts = self.check_option(
                proposal.patient_id,
                option.medication_code,
                exclude_source_cig=proposal.source_cig,
            )
            reviewed.append(
                ReviewedOption(
                    medication_code=option.medication_code,
                    action_task=option.action_task,
                    safe=not conflicts,
                    conflicts=tuple(conflicts),
                    evidence=option.evidence,
                )
            )
        fmt = format_by_gate([o.safe for o in reviewed], proposal.gate)
        return RevisedRecommendation(
            patient_id=proposal.patient_id,
            source_cig=proposal.source_cig,
            decision_task=proposal.decision_task,
            gate=proposal.gate,
            options=tuple(reviewed),
            instruction=fmt.instruction,
            required=fmt.required,
            allowed=fmt.allowed,
            escalation=fmt.escalation,
        )
