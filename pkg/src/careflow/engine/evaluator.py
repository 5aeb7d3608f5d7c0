"""Expression evaluation over instance state under Kleene semantics.

Unknown data propagates through arithmetic and comparison; conjunction and
disjunction resolve as soon as any operand decides them.  ``known`` is the
only construct that turns absence into a definite boolean.  Division by
zero yields UNKNOWN (logged) rather than failing: missing or degenerate
data must never crash scheduling.
"""
from __future__ import annotations

import logging

from ..model.definition import TaskKind
from ..model.expressions import BinOp, Call, Expression, ItemRef, Literal, Not
from .tristate import UNKNOWN, TriValue, tri_and, tri_not, tri_or

logger = logging.getLogger(__name__)


class EvaluationError(Exception):
    """Runtime type mismatch in an expression."""


def _truth(value: object, context: str) -> TriValue:
    if value is UNKNOWN or isinstance(value, bool):
        return value
    raise EvaluationError(f"{context}: expected a boolean, got {value!r}")


def _numeric(value: object, context: str) -> object:
    if value is UNKNOWN:
        return UNKNOWN
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    raise EvaluationError(f"{context}: expected a number, got {value!r}")


def _compare(op: str, left: object, right: object) -> TriValue:
    if left is UNKNOWN or right is UNKNOWN:
        return UNKNOWN
    left_num = isinstance(left, (int, float)) and not isinstance(left, bool)
    right_num = isinstance(right, (int, float)) and not isinstance(right, bool)
    if left_num != right_num or (
        not left_num and type(left) is not type(right)
    ):
        raise EvaluationError(f"cannot compare {left!r} {op} {right!r}")
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    if isinstance(left, bool):
        raise EvaluationError(f"booleans only support == and != (got {op})")
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise EvaluationError(f"unknown comparison {op!r}")


def _ref_arg(call: Call, index: int) -> str:
    arg = call.args[index]
    if not isinstance(arg, ItemRef):
        raise EvaluationError(f"{call.func} expects a name argument")
    return arg.name


def netsupport(inst, candidate_name: str) -> int:
    """Sum of weights of the candidate's arguments whose condition holds.

    Unknown or false conditions contribute nothing, so the result is always
    a definite integer.
    """
    entry = inst.definition.candidate_index.get(candidate_name)
    if entry is None:
        raise EvaluationError(f"unknown candidate {candidate_name!r}")
    _, candidate = entry
    total = 0
    for argument in candidate.arguments:
        if evaluate(argument.condition, inst) is True:
            total += argument.weight
    return total


def evaluate(expr: Expression, inst) -> object:
    """Evaluate against an instance-like context.

    The context needs ``definition``, ``value_of(item)``, ``committed(decision)``
    and ``result_of(task)``; both live engine instances and test oracles
    provide that surface.
    """
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, ItemRef):
        if expr.name not in inst.definition.item_map:
            raise EvaluationError(f"unknown data item {expr.name!r}")
        return inst.value_of(expr.name)
    if isinstance(expr, Not):
        return tri_not(_truth(evaluate(expr.operand, inst), "not"))
    if isinstance(expr, BinOp):
        return _evaluate_binop(expr, inst)
    if isinstance(expr, Call):
        return _evaluate_call(expr, inst)
    raise EvaluationError(f"not an expression node: {expr!r}")


def _evaluate_binop(expr: BinOp, inst) -> object:
    if expr.op == "and":
        return tri_and(
            _truth(evaluate(expr.left, inst), "and"),
            _truth(evaluate(expr.right, inst), "and"),
        )
    if expr.op == "or":
        return tri_or(
            _truth(evaluate(expr.left, inst), "or"),
            _truth(evaluate(expr.right, inst), "or"),
        )
    left = evaluate(expr.left, inst)
    right = evaluate(expr.right, inst)
    if expr.op in ("==", "!=", "<", "<=", ">", ">="):
        return _compare(expr.op, left, right)
    left = _numeric(left, expr.op)
    right = _numeric(right, expr.op)
    if left is UNKNOWN or right is UNKNOWN:
        return UNKNOWN
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if expr.op == "/":
        if right == 0:
            logger.warning("division by zero treated as unknown")
            return UNKNOWN
        return left / right
    raise EvaluationError(f"unknown operator {expr.op!r}")


def _evaluate_call(expr: Call, inst) -> object:
    if expr.func == "known":
        name = _ref_arg(expr, 0)
        if name not in inst.definition.item_map:
            raise EvaluationError(f"unknown data item {name!r}")
        return inst.value_of(name) is not UNKNOWN
    if expr.func == "netsupport":
        return netsupport(inst, _ref_arg(expr, 0))
    if expr.func == "is_committed":
        decision = _ref_arg(expr, 0)
        candidate = _ref_arg(expr, 1)
        task = inst.definition.task_map.get(decision)
        if task is None or task.kind is not TaskKind.DECISION:
            raise EvaluationError(f"unknown decision {decision!r}")
        return candidate in inst.committed(decision)
    if expr.func == "result_of":
        task = _ref_arg(expr, 0)
        if task not in inst.definition.task_map:
            raise EvaluationError(f"unknown task {task!r}")
        return inst.result_of(task)
    if expr.func == "abs":
        value = _numeric(evaluate(expr.args[0], inst), "abs")
        return UNKNOWN if value is UNKNOWN else abs(value)
    if expr.func in ("min", "max"):
        left = _numeric(evaluate(expr.args[0], inst), expr.func)
        right = _numeric(evaluate(expr.args[1], inst), expr.func)
        if left is UNKNOWN or right is UNKNOWN:
            return UNKNOWN
        return min(left, right) if expr.func == "min" else max(left, right)
    raise EvaluationError(f"unknown function {expr.func!r}")


def recommendation_of(inst, decision_name: str, candidate) -> TriValue:
    """Candidate's recommendation; defaults to netsupport >= 1."""
    if candidate.recommend_expr is None:
        return netsupport(inst, candidate.name) >= 1
    return _truth(
        evaluate(candidate.recommend_expr, inst),
        f"recommend_expr of {candidate.name}",
    )
