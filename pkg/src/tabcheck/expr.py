"""Row-level Boolean expression language used by dependency rules.

Grammar (loosest binding first)::

    expr       := or_expr
    or_expr    := and_expr ("or" and_expr)*
    and_expr   := not_expr ("and" not_expr)*
    not_expr   := "not" not_expr | comparison
    comparison := additive (CMP additive)?          CMP: < <= > >= == != ~=
    additive   := term (("+" | "-") term)*
    term       := unary (("*" | "/") unary)*
    unary      := "-" unary | primary
    primary    := NUMBER | STRING | column | FUNC "(" expr ")" | "(" expr ")"
    column     := IDENT | "`" any text but backtick "`"
    FUNC       := "abs" | "date"

Comparisons do not chain. ``a ~= b`` holds when ``|a - b|`` is within the
rule's tolerance. ``date(t)`` truncates a datetime to midnight of its
calendar day. String literals are datetime literals.

Evaluation is three-valued: ``True``, ``False`` or ``None`` (undetermined).
A result is undetermined exactly when a referenced cell is null or a
division by zero occurs anywhere in the expression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from tabcheck.data import MICROS_PER_DAY, Kind, Schema, parse_datetime
from tabcheck.errors import ParseError, RuleSyntaxError, RuleTypeError, UnknownColumnError

# --- AST --------------------------------------------------------------------
# Source positions are carried for error messages but ignored by equality, so
# structurally identical trees compare equal regardless of formatting.


@dataclass(frozen=True)
class Num:
    value: Union[int, float]
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class DateLit:
    text: str
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Col:
    name: str
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Compare:
    op: str  # < <= > >= == != ~=
    left: "Expr"
    right: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    operand: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


Expr = Union[Num, DateLit, Col, Neg, Call, BinOp, Compare, Not, And, Or]

FUNCTIONS = ("abs", "date")
COMPARISONS = ("<", "<=", ">", ">=", "==", "!=", "~=")
KEYWORDS = ("and", "or", "not")


def columns_of(expr: Expr) -> list[str]:
    """Referenced column names in first-occurrence order."""
    out: list[str] = []

    def walk(e):
        if isinstance(e, Col):
            if e.name not in out:
                out.append(e.name)
        elif isinstance(e, (Neg, Not)):
            walk(e.operand)
        elif isinstance(e, Call):
            walk(e.arg)
        elif isinstance(e, (BinOp, Compare, And, Or)):
            walk(e.left)
            walk(e.right)

    walk(expr)
    return out


# --- lexer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | `(?P<quoted>[^`]*)`
  | "(?P<dstr>[^"]*)"
  | '(?P<sstr>[^']*)'
  | (?P<op>~=|<=|>=|==|!=|<|>|\+|-|\*|/|\(|\))
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num ident col str op kw end
    text: str
    line: int
    col: int


def _tokenize(src: str, line: int, col0: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {src[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        col = col0 + pos
        if kind == "num":
            toks.append(_Tok("num", m.group(), line, col))
        elif kind == "ident":
            text = m.group()
            toks.append(_Tok("kw" if text in KEYWORDS else "ident", text, line, col))
        elif kind == "quoted":
            if not m["quoted"].strip():
                raise RuleSyntaxError("empty quoted column name", line, col)
            toks.append(_Tok("col", m["quoted"], line, col))
        elif kind in ("dstr", "sstr"):
            toks.append(_Tok("str", m.group(kind), line, col))
        elif kind == "op":
            toks.append(_Tok("op", m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("end", "", line, col0 + len(src)))
    return toks


# --- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, what: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise RuleSyntaxError(f"expected {what}, found {found}", t.line, t.col)

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def expect_op(self, text: str):
        if not self.at("op", text):
            self.fail(repr(text))
        return self.advance()

    def parse(self) -> Expr:
        e = self.or_expr()
        if not self.at("end"):
            self.fail("operator or end of input")
        return e

    def or_expr(self):
        left = self.and_expr()
        while self.at("kw", "or"):
            t = self.advance()
            left = Or(left, self.and_expr(), pos=(t.line, t.col))
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at("kw", "and"):
            t = self.advance()
            left = And(left, self.not_expr(), pos=(t.line, t.col))
        return left

    def not_expr(self):
        if self.at("kw", "not"):
            t = self.advance()
            return Not(self.not_expr(), pos=(t.line, t.col))
        return self.comparison()

    def comparison(self):
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in COMPARISONS:
            t = self.advance()
            right = self.additive()
            if self.tok.kind == "op" and self.tok.text in COMPARISONS:
                raise RuleSyntaxError(
                    "comparisons cannot be chained; use 'and'", self.tok.line, self.tok.col
                )
            return Compare(t.text, left, right, pos=(t.line, t.col))
        return left

    def additive(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            t = self.advance()
            left = BinOp(t.text, left, self.term(), pos=(t.line, t.col))
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            t = self.advance()
            left = BinOp(t.text, left, self.unary(), pos=(t.line, t.col))
        return left

    def unary(self):
        if self.at("op", "-"):
            t = self.advance()
            return Neg(self.unary(), pos=(t.line, t.col))
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            text = t.text
            if re.fullmatch(r"\d+", text):
                return Num(int(text), pos=(t.line, t.col))
            return Num(float(text), pos=(t.line, t.col))
        if t.kind == "str":
            self.advance()
            return DateLit(t.text, pos=(t.line, t.col))
        if t.kind == "col":
            self.advance()
            return Col(t.text, pos=(t.line, t.col))
        if t.kind == "ident":
            self.advance()
            if self.at("op", "("):
                if t.text not in FUNCTIONS:
                    raise RuleSyntaxError(f"unknown function {t.text!r}", t.line, t.col)
                self.advance()
                arg = self.or_expr()
                self.expect_op(")")
                return Call(t.text, arg, pos=(t.line, t.col))
            return Col(t.text, pos=(t.line, t.col))
        if self.at("op", "("):
            self.advance()
            e = self.or_expr()
            self.expect_op(")")
            return e
        self.fail("a value")


def parse_expr(src: str, line: int = 1, col: int = 1) -> Expr:
    """Parse expression text. ``line``/``col`` locate ``src`` in its file."""
    return _Parser(_tokenize(src, line, col)).parse()


# --- printer ----------------------------------------------------------------

_PREC = {Or: 1, And: 2, Not: 3, Compare: 4, "+": 5, "-": 5, "*": 6, "/": 6, Neg: 7}
_ATOM = 8
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    return _PREC.get(type(e), _ATOM)


def _fmt_num(v) -> str:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"bad literal {v!r}")
    if isinstance(v, int):
        if v < 0:
            raise ValueError("negative literals are expressed with unary minus")
        return str(v)
    if not math.isfinite(v) or v < 0 or math.copysign(1.0, v) < 0:
        raise ValueError(f"literal {v!r} cannot be printed")
    return repr(v)


def to_source(e: Expr) -> str:
    """Render an expression with the minimum parentheses needed to reparse it."""

    def wrap(child, min_prec):
        s = to_source(child)
        return f"({s})" if _prec(child) < min_prec else s

    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, DateLit):
        if '"' in e.text:
            return f"'{e.text}'"
        return f'"{e.text}"'
    if isinstance(e, Col):
        if _IDENT_RE.match(e.name) and e.name not in KEYWORDS:
            return e.name
        return f"`{e.name}`"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, _PREC[Neg])
    if isinstance(e, Not):
        return "not " + wrap(e.operand, _PREC[Not])
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        return f"{wrap(e.left, p)} {e.op} {wrap(e.right, p + 1)}"
    if isinstance(e, Compare):
        # non-associative: both sides must bind tighter
        p = _PREC[Compare] + 1
        return f"{wrap(e.left, p)} {e.op} {wrap(e.right, p)}"
    if isinstance(e, And):
        return f"{wrap(e.left, 2)} and {wrap(e.right, 3)}"
    if isinstance(e, Or):
        return f"{wrap(e.left, 1)} or {wrap(e.right, 2)}"
    raise TypeError(f"not an expression node: {e!r}")


# --- type checking ----------------------------------------------------------

NUM, DT, BOOL = "numeric", "datetime", "boolean"


def infer_type(e: Expr, schema: Schema) -> str:
    """Return the static type of ``e``; raise on unknown columns or type errors."""
    if isinstance(e, Num):
        return NUM
    if isinstance(e, DateLit):
        return DT
    if isinstance(e, Col):
        if e.name not in schema:
            raise UnknownColumnError(e.name, *e.pos)
        kind = schema.column(e.name).kind
        if kind.is_numeric:
            return NUM
        if kind is Kind.DATETIME:
            return DT
        raise RuleTypeError(f"{NUM} or {DT}", f"categorical column {e.name!r}", *e.pos)
    if isinstance(e, Neg):
        _expect(e.operand, NUM, schema, "unary '-'")
        return NUM
    if isinstance(e, Call):
        if e.func == "abs":
            _expect(e.arg, NUM, schema, "abs()")
            return NUM
        _expect(e.arg, DT, schema, "date()")
        return DT
    if isinstance(e, BinOp):
        _expect(e.left, NUM, schema, f"'{e.op}'")
        _expect(e.right, NUM, schema, f"'{e.op}'")
        return NUM
    if isinstance(e, Compare):
        lt = infer_type(e.left, schema)
        rt = infer_type(e.right, schema)
        if lt == BOOL:
            raise RuleTypeError(f"{NUM} or {DT}", BOOL, *e.left.pos, context=f"'{e.op}'")
        if e.op == "~=" and lt != NUM:
            raise RuleTypeError(NUM, lt, *e.left.pos, context="'~='")
        if rt != lt:
            raise RuleTypeError(lt, rt, *e.right.pos, context=f"'{e.op}'")
        return BOOL
    if isinstance(e, Not):
        _expect(e.operand, BOOL, schema, "'not'")
        return BOOL
    if isinstance(e, (And, Or)):
        word = "'and'" if isinstance(e, And) else "'or'"
        _expect(e.left, BOOL, schema, word)
        _expect(e.right, BOOL, schema, word)
        return BOOL
    raise TypeError(f"not an expression node: {e!r}")


def _expect(e, want, schema, context):
    got = infer_type(e, schema)
    if got != want:
        raise RuleTypeError(want, got, *e.pos, context=context)


# --- evaluation -------------------------------------------------------------

RowFn = Callable[[tuple], Optional[object]]

# Float slack on top of the user tolerance so that exact identities survive
# binary rounding (0.1 + 0.2 ~= 0.3 at tolerance 0).
_ULP_SLACK = 8 * 2.220446049250313e-16


def _parse_date_literal(lit: DateLit, schema: Schema) -> int:
    formats = []
    for c in schema.columns:
        if c.kind is Kind.DATETIME and c.datetime_format not in formats:
            formats.append(c.datetime_format)
    formats.append("YYYY-MM-DD hh:mm:ss")
    formats.append("YYYY-MM-DD")
    last = None
    for fmt in formats:
        try:
            return parse_datetime(lit.text, fmt)
        except ParseError as exc:
            last = exc
    raise RuleTypeError(DT, f"unparseable datetime literal {lit.text!r} ({last})", *lit.pos)


def compile_expr(e: Expr, schema: Schema, tolerance: float = 0.01) -> RowFn:
    """Compile ``e`` into a function of a row tuple laid out like ``schema``.

    The function returns the expression's value, or ``None`` when
    undetermined. Type-checks first.
    """
    infer_type(e, schema)
    fn = _compile(e, schema, float(tolerance))
    return fn


def _compile(e, schema, tol) -> RowFn:
    if isinstance(e, Num):
        v = e.value
        return lambda row: v
    if isinstance(e, DateLit):
        v = _parse_date_literal(e, schema)
        return lambda row: v
    if isinstance(e, Col):
        i = schema.index(e.name)
        return lambda row: row[i]
    if isinstance(e, Neg):
        f = _compile(e.operand, schema, tol)

        def neg(row):
            a = f(row)
            return None if a is None else -a

        return neg
    if isinstance(e, Call):
        f = _compile(e.arg, schema, tol)
        if e.func == "abs":
            return lambda row: None if (a := f(row)) is None else abs(a)
        return lambda row: None if (a := f(row)) is None else a - a % MICROS_PER_DAY
    if isinstance(e, BinOp):
        return _compile_binop(e.op, _compile(e.left, schema, tol), _compile(e.right, schema, tol))
    if isinstance(e, Compare):
        return _compile_compare(e.op, _compile(e.left, schema, tol), _compile(e.right, schema, tol), tol)
    if isinstance(e, Not):
        f = _compile(e.operand, schema, tol)
        return lambda row: None if (a := f(row)) is None else not a
    if isinstance(e, (And, Or)):
        lf = _compile(e.left, schema, tol)
        rf = _compile(e.right, schema, tol)
        is_and = isinstance(e, And)

        # Both sides are always evaluated: a null anywhere makes the whole
        # expression undetermined, regardless of short-circuit order.
        def conn(row):
            a = lf(row)
            b = rf(row)
            if a is None or b is None:
                return None
            return (a and b) if is_and else (a or b)

        return conn
    raise TypeError(f"not an expression node: {e!r}")


def _compile_binop(op, lf, rf) -> RowFn:
    if op == "+":
        def f(row):
            a, b = lf(row), rf(row)
            return None if a is None or b is None else a + b
    elif op == "-":
        def f(row):
            a, b = lf(row), rf(row)
            return None if a is None or b is None else a - b
    elif op == "*":
        def f(row):
            a, b = lf(row), rf(row)
            return None if a is None or b is None else a * b
    else:
        def f(row):
            a, b = lf(row), rf(row)
            if a is None or b is None or b == 0:
                return None
            return a / b
    return f


def _compile_compare(op, lf, rf, tol) -> RowFn:
    if op == "~=":
        def f(row):
            a, b = lf(row), rf(row)
            if a is None or b is None:
                return None
            return abs(a - b) <= tol + _ULP_SLACK * max(abs(a), abs(b))
        return f
    import operator

    pyop = {
        "<": operator.lt,
        "<=": operator.le,
        ">": operator.gt,
        ">=": operator.ge,
        "==": operator.eq,
        "!=": operator.ne,
    }[op]

    def cmp(row):
        a, b = lf(row), rf(row)
        if a is None or b is None:
            return None
        return pyop(a, b)

    return cmp


def eval_expr(e: Expr, row: tuple, schema: Schema, tolerance: float = 0.01) -> Optional[bool]:
    """Evaluate a Boolean expression on one row: True, False, or None (undetermined)."""
    return compile_expr(e, schema, tolerance)(row)
