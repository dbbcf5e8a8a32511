import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orders_fixture import DT_FORMAT
from tabcheck.data import Column, Kind, Schema, parse_datetime
from tabcheck.errors import RuleSyntaxError, RuleTypeError, UnknownColumnError
from tabcheck.expr import (
    And,
    BinOp,
    Call,
    Col,
    Compare,
    DateLit,
    Neg,
    Not,
    Num,
    Or,
    columns_of,
    compile_expr,
    eval_expr,
    infer_type,
    parse_expr,
    to_source,
)

a, b, c = Col("a"), Col("b"), Col("c")

PREC_CASES = [
    ("a + b * c", BinOp("+", a, BinOp("*", b, c))),
    ("a * b + c", BinOp("+", BinOp("*", a, b), c)),
    ("a - b - c", BinOp("-", BinOp("-", a, b), c)),
    ("a / b / c", BinOp("/", BinOp("/", a, b), c)),
    ("a - (b - c)", BinOp("-", a, BinOp("-", b, c))),
    ("-a * b", BinOp("*", Neg(a), b)),
    ("--a", Neg(Neg(a))),
    ("not a < b", Not(Compare("<", a, b))),
    ("a + 1 < b * 2", Compare("<", BinOp("+", a, Num(1)), BinOp("*", b, Num(2)))),
    ("a < b and b < c or a == c", Or(And(Compare("<", a, b), Compare("<", b, c)), Compare("==", a, c))),
    ("a < b or b < c and a == c", Or(Compare("<", a, b), And(Compare("<", b, c), Compare("==", a, c)))),
    ("not a < b and b < c", And(Not(Compare("<", a, b)), Compare("<", b, c))),
    ("not not a < b", Not(Not(Compare("<", a, b)))),
    ("abs(a - b) <= 0.5", Compare("<=", Call("abs", BinOp("-", a, b)), Num(0.5))),
    ("a ~= b * c", Compare("~=", a, BinOp("*", b, c))),
    ("`order date` < b", Compare("<", Col("order date"), b)),
]


@pytest.mark.parametrize("src, tree", PREC_CASES, ids=[s for s, _ in PREC_CASES])
def test_precedence(src, tree):
    assert parse_expr(src) == tree
    assert parse_expr(to_source(tree)) == tree


def test_comparisons_do_not_chain():
    with pytest.raises(RuleSyntaxError):
        parse_expr("a < b < c")


@pytest.mark.parametrize(
    "src, col",
    [("1 + ", 5), ("(a + b", 7), ("a <", 4), ("a b", 3), ("abs a", 5), ("a $ b", 3)],
)
def test_syntax_errors_carry_position(src, col):
    with pytest.raises(RuleSyntaxError) as exc:
        parse_expr(src, line=4)
    assert exc.value.line == 4
    assert exc.value.col == col


def test_incomplete_expression_reports_end_of_input():
    with pytest.raises(RuleSyntaxError) as exc:
        parse_expr("1 + ")
    assert "end of input" in str(exc.value)


# --- round trip -------------------------------------------------------------

names = st.one_of(
    st.sampled_from(["a", "b", "qty", "x_1", "order_date"]),
    st.text(alphabet="xyz _-", min_size=1, max_size=6).filter(lambda s: s.strip() == s),
)
leaves = st.one_of(
    st.builds(Num, st.integers(0, 10**6)),
    st.builds(Num, st.floats(0, 1e6, allow_nan=False, allow_infinity=False).filter(lambda v: v > 0 or str(v) == "0.0")),
    st.builds(Col, names),
    st.builds(DateLit, st.sampled_from(["01/01/2015 00:00:00", "2016-02-29"])),
)


def extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(Not, children),
        st.builds(Call, st.sampled_from(["abs", "date"]), children),
        st.builds(BinOp, st.sampled_from("+-*/"), children, children),
        st.builds(Compare, st.sampled_from(["<", "<=", ">", ">=", "==", "!=", "~="]), children, children),
        st.builds(And, children, children),
        st.builds(Or, children, children),
    )


def depth(e):
    kids = [getattr(e, k) for k in ("operand", "arg", "left", "right") if hasattr(e, k)]
    return 1 + max((depth(k) for k in kids), default=0)


asts = st.recursive(leaves, extend, max_leaves=24).filter(lambda e: depth(e) <= 6)


@settings(max_examples=1200, deadline=None)
@given(asts)
def test_print_parse_round_trip(tree):
    assert parse_expr(to_source(tree)) == tree


@given(asts)
def test_printing_is_a_fixed_point(tree):
    s = to_source(tree)
    assert to_source(parse_expr(s)) == s


# --- types ------------------------------------------------------------------

SCHEMA = Schema(
    (
        Column("qty", Kind.INTEGER),
        Column("price", Kind.REAL),
        Column("total", Kind.REAL),
        Column("city", Kind.CATEGORICAL),
        Column("t0", Kind.DATETIME, DT_FORMAT),
        Column("t1", Kind.DATETIME, DT_FORMAT),
    )
)


@pytest.mark.parametrize(
    "src, expected",
    [("qty * price", "numeric"), ("t0 < t1", "boolean"), ("date(t0)", "datetime"), ("not qty > 1", "boolean")],
)
def test_infer_type(src, expected):
    assert infer_type(parse_expr(src), SCHEMA) == expected


@pytest.mark.parametrize(
    "src, line, col",
    [
        ("qty + t0 > 1", 3, 7),  # datetime in arithmetic
        ("t0 < qty", 3, 6),
        ("qty and t0 < t1", 3, 1),
        ("t0 ~= t1", 3, 1),
        ("city == qty", 3, 1),
        ("abs(t0) > 1", 3, 5),
    ],
)
def test_type_errors_carry_position(src, line, col):
    tree = parse_expr(src, line=3)
    with pytest.raises(RuleTypeError) as exc:
        infer_type(tree, SCHEMA)
    assert (exc.value.line, exc.value.col) == (line, col)


def test_unknown_column_carries_name_and_position():
    with pytest.raises(UnknownColumnError) as exc:
        infer_type(parse_expr("qty < quantity", line=2, col=8), SCHEMA)
    assert exc.value.name == "quantity"
    assert (exc.value.line, exc.value.col) == (2, 14)


def test_columns_of_is_ordered_and_unique():
    assert columns_of(parse_expr("total ~= qty * price and qty > 0")) == ["total", "qty", "price"]


# --- evaluation ---------------------------------------------------------------

FIN = Schema(
    (
        Column("quantity", Kind.INTEGER),
        Column("product_price", Kind.REAL),
        Column("original_price", Kind.REAL),
    )
)
ORIGINAL = parse_expr("original_price ~= quantity * product_price")


@pytest.mark.parametrize(
    "row, expected",
    [
        ((5, 49.98, 249.90), True),
        ((5, 48.40, 191.56), False),
        ((None, 48.40, 191.56), None),
        ((1, 50.0, 50.0), True),
    ],
)
def test_financial_identity(row, expected):
    assert eval_expr(ORIGINAL, row, FIN, 0.01) is expected


def test_irreflexive_less_than():
    e = parse_expr("quantity < quantity")
    for q in (-3, 0, 7):
        assert eval_expr(e, (q, 1.0, 1.0), FIN) is False


def test_division_by_zero_is_undetermined():
    e = parse_expr("product_price / quantity > 1 or quantity == 0")
    assert eval_expr(e, (0, 1.0, 1.0), FIN) is None


def test_null_poisons_boolean_connectives():
    e = parse_expr("quantity > 100 and product_price > 0")
    assert eval_expr(e, (1, None, 1.0), FIN) is None


def test_tolerance_is_inclusive_and_absolute():
    e = parse_expr("original_price ~= product_price")
    assert eval_expr(e, (0, 1.0, 1.01), FIN, 0.01) is True
    assert eval_expr(e, (0, 1.0, 1.0101), FIN, 0.01) is False
    assert eval_expr(e, (0, 0.1 + 0.2, 0.3), FIN, 0.0) is True


@given(
    st.floats(-1e6, 1e6),
    st.floats(-1e6, 1e6),
    st.floats(0, 10),
    st.floats(0, 10),
)
def test_tolerance_monotone(x, y, t1, t2):
    e = parse_expr("original_price ~= product_price")
    lo, hi = sorted((t1, t2))
    if eval_expr(e, (0, x, y), FIN, lo):
        assert eval_expr(e, (0, x, y), FIN, hi) is True


def test_temporal_order():
    e = parse_expr("t0 < t1")
    t0 = parse_datetime("16/01/2015 22:19:11", DT_FORMAT)
    t1 = parse_datetime("16/01/2015 10:19:00", DT_FORMAT)
    row = (1, 1.0, 1.0, "x", t0, t1)
    assert eval_expr(e, row, SCHEMA) is False
    assert eval_expr(parse_expr("date(t0) <= date(t1)"), row, SCHEMA) is True


def test_datetime_literal_uses_schema_format():
    e = parse_expr('t0 >= "01/01/2015 00:00:00"')
    t = parse_datetime("02/01/2015 00:00:00", DT_FORMAT)
    assert eval_expr(e, (1, 1.0, 1.0, "x", t, t), SCHEMA) is True
    with pytest.raises(RuleTypeError):
        compile_expr(parse_expr('t0 >= "yesterday"'), SCHEMA)


@given(st.tuples(st.integers(-5, 5) | st.none(), st.floats(-5, 5) | st.none(), st.floats(-5, 5) | st.none()))
def test_evaluation_is_total_and_pure(row):
    e = parse_expr("not (original_price ~= quantity * product_price) or product_price / quantity > 0")
    first = eval_expr(e, row, FIN)
    assert first in (True, False, None)
    assert eval_expr(e, row, FIN) is first
    if None in row:
        assert first is None
