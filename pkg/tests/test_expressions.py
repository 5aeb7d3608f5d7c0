"""Grammar, printer round-trip, and three-valued evaluation."""
import json

import pytest
from hypothesis import given, settings, strategies as st

from careflow.engine import UNKNOWN, evaluate, tri_and, tri_not, tri_or
from careflow.engine.evaluator import EvaluationError
from careflow.model import parse_guideline
from careflow.model.expressions import (
    BinOp,
    Call,
    ExpressionSyntaxError,
    ItemRef,
    Literal,
    Not,
    parse_expression,
    to_source,
)


def test_precedence_chain():
    expr = parse_expression("grade >= 1 and known(temp)")
    assert expr == BinOp(
        "and",
        BinOp(">=", ItemRef("grade"), Literal(1)),
        Call("known", (ItemRef("temp"),)),
    )


def test_builtin_call_ast_shape():
    # Hand-built tree for the canonical recommendation rule.
    expr = parse_expression("netsupport(c_paracetamol) >= 1")
    assert expr == BinOp(">=", Call("netsupport", (ItemRef("c_paracetamol"),)), Literal(1))


def test_incomplete_input_reports_position():
    with pytest.raises(ExpressionSyntaxError) as exc:
        parse_expression("1 + ")
    assert exc.value.position == 4


@pytest.mark.parametrize(
    "source",
    ["", "1 +", "(a or b", "a ==", "foo(1)", "min(1)", "not", "a b", "1 ** 2", "\"unclosed"],
)
def test_syntax_errors(source):
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(source)


def test_not_binds_tighter_than_and():
    expr = parse_expression("not a and b")
    assert expr == BinOp("and", Not(ItemRef("a")), ItemRef("b"))


def test_arithmetic_precedence():
    expr = parse_expression("1 + 2 * 3 - 4 / 2")
    assert expr == BinOp(
        "-",
        BinOp("+", Literal(1), BinOp("*", Literal(2), Literal(3))),
        BinOp("/", Literal(4), Literal(2)),
    )


def test_or_is_left_associative():
    expr = parse_expression("a or b or c")
    assert expr == BinOp("or", BinOp("or", ItemRef("a"), ItemRef("b")), ItemRef("c"))


def test_single_comparison_only():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("1 < 2 < 3")


def test_boolean_literals_and_strings():
    assert parse_expression("true") == Literal(True)
    assert parse_expression('"a \\"b\\" c"') == Literal('a "b" c')


# -- printer round-trip -------------------------------------------------------

_idents = st.sampled_from(["alpha", "beta", "g2", "temp", "x_1", "grade_a"])
_numbers = st.one_of(
    st.integers(0, 10_000),
    st.integers(0, 10**6).map(lambda n: n / 100),
)
_texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=12
)


def _leaves():
    return st.one_of(
        _numbers.map(Literal),
        st.booleans().map(Literal),
        _texts.map(Literal),
        _idents.map(ItemRef),
        _idents.map(lambda n: Call("known", (ItemRef(n),))),
        _idents.map(lambda n: Call("netsupport", (ItemRef(n),))),
        st.tuples(_idents, _idents).map(
            lambda t: Call("is_committed", (ItemRef(t[0]), ItemRef(t[1])))
        ),
    )


_ALL_OPS = ["or", "and", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/"]


def _extend(children):
    return st.one_of(
        children.map(Not),
        st.tuples(st.sampled_from(_ALL_OPS), children, children).map(
            lambda t: BinOp(t[0], t[1], t[2])
        ),
        children.map(lambda c: Call("abs", (c,))),
        st.tuples(children, children).map(lambda t: Call("min", t)),
        st.tuples(children, children).map(lambda t: Call("max", t)),
    )


_expr_trees = st.recursive(_leaves(), _extend, max_leaves=25)


@given(_expr_trees)
@settings(max_examples=300, deadline=None)
def test_print_parse_round_trip(expr):
    assert parse_expression(to_source(expr)) == expr


# -- Kleene evaluation ---------------------------------------------------------

_TRI = (True, False, UNKNOWN)


def test_kleene_tables():
    for a in _TRI:
        for b in _TRI:
            expected_and = (
                False if (a is False or b is False)
                else UNKNOWN if (a is UNKNOWN or b is UNKNOWN)
                else True
            )
            expected_or = (
                True if (a is True or b is True)
                else UNKNOWN if (a is UNKNOWN or b is UNKNOWN)
                else False
            )
            assert tri_and(a, b) is expected_and
            assert tri_or(a, b) is expected_or
    assert tri_not(UNKNOWN) is UNKNOWN
    assert tri_not(True) is False
    assert tri_not(False) is True


def _ctx(**values):
    doc = {
        "id": "ctx",
        "version": "1",
        "description": "",
        "data_items": [
            {"name": "x", "value_type": "integer"},
            {"name": "y", "value_type": "integer"},
            {"name": "label", "value_type": "text"},
        ],
        "tasks": [
            {"name": "root", "kind": "plan", "components": ["d"]},
            {
                "name": "d",
                "kind": "decision",
                "candidates": [
                    {
                        "name": "c_mixed",
                        "arguments": [
                            {"condition": "x >= 1", "weight": 1},
                            {"condition": "x >= 5", "weight": 1},
                            {"condition": "y >= 0", "weight": -1},
                        ],
                    }
                ],
            },
        ],
        "root_plan": "root",
    }
    from careflow.engine import enact, set_data_values, DataValueBinding

    inst = enact(parse_guideline(json.dumps(doc)), "p")
    set_data_values(
        inst, [DataValueBinding(item=k, value=v) for k, v in values.items()]
    )
    return inst


def _ev(source, **values):
    return evaluate(parse_expression(source), _ctx(**values))


def test_unknown_comparison_propagates():
    assert _ev("x >= 1") is UNKNOWN


def test_known_shortcuts_kleene_or():
    assert _ev("known(x) or x > 5") is UNKNOWN  # false or unknown
    assert _ev("known(x) or x > 5", x=7) is True


def test_netsupport_sums_true_arguments_only():
    # +1 (x>=1 true), +1 (x>=5 false), -1 (y>=0 true) -> 0
    assert _ev("netsupport(c_mixed)", x=1, y=0) == 0


def test_netsupport_ignores_unknown_conditions():
    assert _ev("netsupport(c_mixed)", x=1) == 1  # y unknown: -1 not counted


def test_division_by_zero_is_unknown():
    assert _ev("x / y", x=4, y=0) is UNKNOWN
    assert _ev("x / y", x=4, y=2) == 2


def test_arithmetic_with_unknown_operand():
    assert _ev("x + 1") is UNKNOWN
    assert _ev("abs(x - 5)", x=2) == 3
    assert _ev("min(x, y)", x=2, y=7) == 2
    assert _ev("max(x, y)", x=2, y=7) == 7


def test_runtime_type_mismatch_raises():
    with pytest.raises(EvaluationError):
        _ev('label + 1', label="hi")
    with pytest.raises(EvaluationError):
        _ev('x and known(x)', x=1)
    with pytest.raises(EvaluationError):
        _ev('label < 3', label="hi")


def test_string_comparison():
    assert _ev('label == "hi"', label="hi") is True
    assert _ev('label != "hi"', label="ho") is True
