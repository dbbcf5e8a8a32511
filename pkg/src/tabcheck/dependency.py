"""Multivariate Dependency Index.

Each (row, rule) pair scores 1 when the rule's expression evaluates to
True. False and undetermined (null cell, division by zero) both score 0,
and every rule is normalised by the full row count, so the overall value
is ``100 * satisfied / (rows * rules)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from tabcheck.data import Table
from tabcheck.errors import EmptyTableError, SchemaMismatchError
from tabcheck.expr import compile_expr
from tabcheck.rulespec import DependencyRule

VIOLATION_SAMPLE_CAP = 100


@dataclass(frozen=True)
class RuleScore:
    satisfied_count: int
    row_count: int
    score: float
    undetermined_count: int = 0


@dataclass(frozen=True)
class RuleViolation:
    row: int
    name: str
    values: dict  # every column the rule references -> cell value
    undetermined: bool = False


@dataclass(frozen=True)
class MdiResult:
    overall: float
    per_rule: dict = field(default_factory=dict)  # name -> RuleScore
    violations: tuple = ()


def rule_verdicts(syn: Table, rule: DependencyRule, tolerance: float | None = None) -> list:
    """Per-row verdicts (True / False / None) of one rule."""
    tol = rule.tolerance if tolerance is None else tolerance
    fn = compile_expr(rule.expr, syn.schema, tol)
    return [fn(row) for row in syn.rows()]


def mdi(
    syn: Table,
    rules: list[DependencyRule],
    *,
    tolerance: float | None = None,
    sample_cap: int = VIOLATION_SAMPLE_CAP,
) -> MdiResult:
    """Evaluate every rule on every row of ``syn``.

    ``tolerance`` overrides each rule's own tolerance when given.
    """
    if not rules:
        raise ValueError("mdi needs at least one dependency rule")
    m = syn.n_rows
    if m == 0:
        raise EmptyTableError("synthetic table has no rows")
    for r in rules:
        missing = [c for c in sorted(r.group_columns | set(r.columns)) if c not in syn.schema]
        if missing:
            raise SchemaMismatchError(f"rule {r.name!r}: synthetic table lacks {missing}")

    per_rule = {}
    violations = []
    total = 0
    for r in rules:
        verdicts = rule_verdicts(syn, r, tolerance)
        hits = sum(1 for v in verdicts if v is True)
        undetermined = sum(1 for v in verdicts if v is None)
        total += hits
        per_rule[r.name] = RuleScore(hits, m, 100.0 * hits / m, undetermined)
        if sample_cap:
            cols = r.columns
            idx = [syn.schema.index(c) for c in cols]
            sampled = 0
            for j, v in enumerate(verdicts):
                if v is True:
                    continue
                row = syn.row(j)
                violations.append(
                    RuleViolation(j, r.name, {c: row[i] for c, i in zip(cols, idx)}, v is None)
                )
                sampled += 1
                if sampled >= sample_cap:
                    break
    overall = 100.0 * total / (m * len(rules))
    return MdiResult(overall, per_rule, tuple(violations))
