"""Hierarchical Consistency Score.

Every (row, group) pair contributes an indicator: 1 when the row's values
over the group's columns form a complete tuple found in the group's valid
tuple set, else 0. The score is ``100 * hits / (rows * groups)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from tabcheck.data import Kind, Table
from tabcheck.errors import (
    EmptyReferenceError,
    EmptyTableError,
    NonCategoricalColumnError,
    SchemaMismatchError,
)
from tabcheck.rulespec import ConsistencyGroup, ValidTupleSet, load_tuple_file

VIOLATION_SAMPLE_CAP = 100


@dataclass(frozen=True)
class GroupScore:
    valid_count: int
    row_count: int
    score: float


@dataclass(frozen=True)
class Violation:
    row: int
    name: str
    values: tuple


@dataclass(frozen=True)
class HcsResult:
    overall: float
    per_group: dict = field(default_factory=dict)  # name -> GroupScore
    violations: tuple = ()


def _trim(t: tuple) -> tuple:
    return tuple(v.strip() if isinstance(v, str) else v for v in t)


def _group_tuples(table: Table, columns):
    cols = [table.column(c) for c in columns]
    return (_trim(t) for t in zip(*cols))


def infer_valid_tuples(real: Table, group: ConsistencyGroup) -> ValidTupleSet:
    """Collect the distinct complete tuples ``real`` shows over ``group.columns``."""
    for c in group.columns:
        if c not in real.schema:
            raise SchemaMismatchError(f"real table has no column {c!r}")
        if real.schema.column(c).kind is not Kind.CATEGORICAL:
            raise NonCategoricalColumnError(c)
    tuples = {t for t in _group_tuples(real, group.columns) if None not in t}
    if not tuples:
        raise EmptyReferenceError(
            f"group {group.name!r}: real table has no complete rows over {list(group.columns)}"
        )
    return ValidTupleSet(group, frozenset(tuples))


def reference_tuples(real: Table, group: ConsistencyGroup) -> ValidTupleSet:
    """Valid tuples for ``group``: its explicit tuple file if set, else inferred from ``real``."""
    if group.reference is not None:
        return load_tuple_file(group.reference, group)
    return infer_valid_tuples(real, group)


def hcs(
    syn: Table,
    groups: list[ConsistencyGroup],
    valid: list[ValidTupleSet],
    *,
    sample_cap: int = VIOLATION_SAMPLE_CAP,
) -> HcsResult:
    """Score ``syn`` against the valid tuple sets; see module docstring."""
    if not groups:
        raise ValueError("hcs needs at least one consistency group")
    if len(groups) != len(valid):
        raise ValueError(f"{len(groups)} groups but {len(valid)} valid tuple sets")
    m = syn.n_rows
    if m == 0:
        raise EmptyTableError("synthetic table has no rows")
    for g in groups:
        missing = [c for c in g.columns if c not in syn.schema]
        if missing:
            raise SchemaMismatchError(f"group {g.name!r}: synthetic table lacks {missing}")

    per_group = {}
    violations = []
    total = 0
    for g, vs in zip(groups, valid):
        allowed = {_trim(t) for t in vs.tuples}
        hits = 0
        sampled = 0
        for j, t in enumerate(_group_tuples(syn, g.columns)):
            if None not in t and t in allowed:
                hits += 1
            elif sampled < sample_cap:
                violations.append(Violation(j, g.name, t))
                sampled += 1
        total += hits
        per_group[g.name] = GroupScore(hits, m, 100.0 * hits / m)
    overall = 100.0 * total / (m * len(groups))
    return HcsResult(overall, per_group, tuple(violations))
