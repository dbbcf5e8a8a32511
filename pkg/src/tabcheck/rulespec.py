"""Rule files: consistency groups and dependency rules.

A rule file is a sequence of INI-like sections::

    # comments start with '#' or ';'
    [group order_geo]
    columns = order_city, order_state, order_country, order_region, order_market
    reference = real                 # or a path to a CSV of valid tuples

    [rule shipping_after_order]
    expr = order_date < shipping_date

    [rule original_price]
    expr = original_price ~= quantity * product_price
    tolerance = 0.01

``columns`` lists are comma separated; column names may contain spaces.
A rule's optional ``columns`` key names its dependency group; by default
the group is the set of columns its expression references.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from tabcheck.data import Schema
from tabcheck.errors import RuleError, RuleSyntaxError, RuleTypeError, UnknownColumnError
from tabcheck.expr import BOOL, Expr, columns_of, infer_type, parse_expr, to_source

DEFAULT_TOLERANCE = 0.01
REFERENCE_REAL = "real"

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_SECTION_RE = re.compile(r"\[\s*(group|rule)\s+([^\]\s]+)\s*\]\s*\Z")
_GROUP_KEYS = {"columns", "reference"}
_RULE_KEYS = {"expr", "tolerance", "columns"}


@dataclass(frozen=True)
class ConsistencyGroup:
    """Columns whose values must jointly form an admissible combination."""

    name: str
    columns: tuple[str, ...]
    # None: valid tuples come from the real table; otherwise a tuple CSV path.
    reference: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(self.columns) < 2:
            raise ValueError(f"group {self.name!r} needs at least 2 columns")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"group {self.name!r} repeats a column")


@dataclass(frozen=True)
class DependencyRule:
    """A row-local Boolean condition with an absolute tolerance for ``~=``."""

    name: str
    expr: Expr
    tolerance: float = DEFAULT_TOLERANCE
    group_columns: frozenset = frozenset()

    def __post_init__(self):
        if not self.tolerance >= 0:
            raise ValueError(f"rule {self.name!r}: tolerance must be nonnegative")
        if not self.group_columns:
            object.__setattr__(self, "group_columns", frozenset(columns_of(self.expr)))

    @property
    def columns(self) -> list[str]:
        return columns_of(self.expr)

    @property
    def source(self) -> str:
        return to_source(self.expr)


@dataclass(frozen=True)
class ValidTupleSet:
    group: ConsistencyGroup
    tuples: frozenset

    def __post_init__(self):
        object.__setattr__(self, "tuples", frozenset(tuple(t) for t in self.tuples))
        arity = len(self.group.columns)
        for t in self.tuples:
            if len(t) != arity:
                raise ValueError(
                    f"group {self.group.name!r}: tuple {t!r} has arity {len(t)}, expected {arity}"
                )

    def __len__(self) -> int:
        return len(self.tuples)

    def __contains__(self, item) -> bool:
        return item in self.tuples


class RuleSet(NamedTuple):
    groups: tuple
    rules: tuple

    def group(self, name: str) -> ConsistencyGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def rule(self, name: str) -> DependencyRule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)


def check_rule(rule: DependencyRule, schema: Schema) -> None:
    """Type-check a rule against ``schema``."""
    t = infer_type(rule.expr, schema)
    if t != BOOL:
        raise RuleTypeError(BOOL, t, *rule.expr.pos, context=f"rule {rule.name!r}")
    for c in rule.group_columns:
        if c not in schema:
            raise UnknownColumnError(c)


def check_group(group: ConsistencyGroup, schema: Schema) -> None:
    for c in group.columns:
        if c not in schema:
            raise UnknownColumnError(c)


@dataclass
class _Section:
    kind: str
    name: str
    line: int
    entries: dict  # key -> (value, line, col)


def _split_sections(text: str) -> list[_Section]:
    sections: list[_Section] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        indent = len(raw) - len(raw.lstrip())
        if stripped.startswith("["):
            m = _SECTION_RE.match(_strip_comment(stripped))
            if m is None:
                raise RuleSyntaxError(
                    "expected '[group <name>]' or '[rule <name>]'", lineno, indent + 1
                )
            kind, name = m.groups()
            if not _NAME_RE.match(name):
                raise RuleSyntaxError(f"invalid {kind} name {name!r}", lineno, indent + 1)
            current = _Section(kind, name, lineno, {})
            sections.append(current)
            continue
        if "=" not in stripped:
            raise RuleSyntaxError("expected 'key = value'", lineno, indent + 1)
        if current is None:
            raise RuleSyntaxError("key outside of any section", lineno, indent + 1)
        eq = raw.index("=")
        key = raw[:eq].strip()
        value_raw = raw[eq + 1 :]
        lead = len(value_raw) - len(value_raw.lstrip())
        value = _strip_comment(value_raw.strip())
        if key in current.entries:
            raise RuleSyntaxError(f"duplicate key {key!r}", lineno, indent + 1)
        current.entries[key] = (value, lineno, eq + 2 + lead)
    return sections


def _strip_comment(value: str) -> str:
    # A ' #' outside quotes starts a trailing comment.
    quote = None
    for i, ch in enumerate(value):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'`":
            quote = ch
        elif ch in "#;" and (i == 0 or value[i - 1].isspace()):
            return value[:i].rstrip()
    return value


def _column_list(value: str, line: int, col: int) -> list[str]:
    names = [n.strip().strip("`") for n in value.split(",")]
    if any(not n for n in names):
        raise RuleSyntaxError("empty column name in list", line, col)
    return names


def parse_rules_text(text: str, schema: Schema, base_dir: Path | None = None) -> RuleSet:
    """Parse and type-check rule-file text against ``schema``."""
    base_dir = Path(base_dir) if base_dir is not None else Path(".")
    groups: list[ConsistencyGroup] = []
    rules: list[DependencyRule] = []
    seen = {"group": set(), "rule": set()}
    for sec in _split_sections(text):
        if sec.name in seen[sec.kind]:
            raise RuleSyntaxError(f"duplicate {sec.kind} name {sec.name!r}", sec.line, 1)
        seen[sec.kind].add(sec.name)
        allowed = _GROUP_KEYS if sec.kind == "group" else _RULE_KEYS
        for key, (_, line, _) in sec.entries.items():
            if key not in allowed:
                raise RuleSyntaxError(
                    f"unknown key {key!r} in {sec.kind} {sec.name!r}", line, 1
                )
        if sec.kind == "group":
            groups.append(_build_group(sec, schema, base_dir))
        else:
            rules.append(_build_rule(sec, schema))
    return RuleSet(tuple(groups), tuple(rules))


def _build_group(sec: _Section, schema: Schema, base_dir: Path) -> ConsistencyGroup:
    if "columns" not in sec.entries:
        raise RuleSyntaxError(f"group {sec.name!r} lacks 'columns'", sec.line, 1)
    value, line, col = sec.entries["columns"]
    names = _column_list(value, line, col)
    for n in names:
        if n not in schema:
            raise UnknownColumnError(n, line, col + value.find(n))
    if len(names) < 2:
        raise RuleSyntaxError(f"group {sec.name!r} needs at least 2 columns", line, col)
    if len(set(names)) != len(names):
        raise RuleSyntaxError(f"group {sec.name!r} repeats a column", line, col)
    reference = None
    if "reference" in sec.entries:
        ref, _, _ = sec.entries["reference"]
        ref = ref.strip().strip('"')
        if ref and ref != REFERENCE_REAL:
            p = Path(ref)
            reference = p if p.is_absolute() else base_dir / p
    return ConsistencyGroup(sec.name, tuple(names), reference)


def _build_rule(sec: _Section, schema: Schema) -> DependencyRule:
    if "expr" not in sec.entries:
        raise RuleSyntaxError(f"rule {sec.name!r} lacks 'expr'", sec.line, 1)
    text, line, col = sec.entries["expr"]
    expr = parse_expr(text, line, col)
    t = infer_type(expr, schema)
    if t != BOOL:
        raise RuleTypeError(BOOL, t, line, col, context=f"rule {sec.name!r}")
    tolerance = DEFAULT_TOLERANCE
    if "tolerance" in sec.entries:
        tv, tl, tc = sec.entries["tolerance"]
        try:
            tolerance = float(tv)
        except ValueError:
            raise RuleSyntaxError(f"tolerance must be a number, found {tv!r}", tl, tc) from None
        if not tolerance >= 0:
            raise RuleSyntaxError("tolerance must be nonnegative", tl, tc)
    group_cols = frozenset(columns_of(expr))
    if "columns" in sec.entries:
        cv, cl, cc = sec.entries["columns"]
        names = _column_list(cv, cl, cc)
        for n in names:
            if n not in schema:
                raise UnknownColumnError(n, cl, cc + cv.find(n))
        group_cols = frozenset(names)
    return DependencyRule(sec.name, expr, tolerance, group_cols)


def parse_rules(path, schema: Schema) -> RuleSet:
    """Read a rule file. Relative tuple-file references resolve against its directory.

    The result unpacks as ``groups, rules = parse_rules(path, schema)``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise RuleError(f"{path}: not valid UTF-8 ({exc})") from None
    return parse_rules_text(text, schema, base_dir=path.parent)


def load_tuple_file(path, group: ConsistencyGroup) -> ValidTupleSet:
    """Read an explicit valid-tuple CSV whose header names the group's columns."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if set(header) != set(group.columns) or len(header) != len(group.columns):
            raise RuleError(
                f"{path}: header {header} does not match group {group.name!r} "
                f"columns {list(group.columns)}"
            )
        order = [header.index(c) for c in group.columns]
        tuples = set()
        for record in reader:
            if not record:
                continue
            cells = [record[i].strip() for i in order]
            tuples.add(tuple(cells))
    return ValidTupleSet(group, frozenset(tuples))
