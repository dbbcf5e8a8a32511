"""Seeded perturbations and a SMOTE-style interpolator.

Perturbations damage a table in a controlled way so every metric has an
exactly predictable response. ``smote_like`` produces plausible synthetic
rows for desk-scale experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from tabcheck.data import MICROS_PER_DAY, Kind, Table
from tabcheck.errors import InsufficientRowsError, UnknownTargetError
from tabcheck.expr import compile_expr
from tabcheck.rulespec import ConsistencyGroup, DependencyRule


@dataclass(frozen=True)
class CorruptGroup:
    group: ConsistencyGroup
    fraction: float
    seed: int = 0


@dataclass(frozen=True)
class BreakRule:
    rule: DependencyRule
    fraction: float
    seed: int = 0


@dataclass(frozen=True)
class SwapDates:
    rule: DependencyRule
    fraction: float
    seed: int = 0


@dataclass(frozen=True)
class ShuffleColumn:
    column: str
    seed: int = 0


@dataclass(frozen=True)
class GaussianNoise:
    """Add ``N(0, (sigma * column std)^2)`` noise to every row of ``columns``."""

    columns: tuple
    sigma: float
    seed: int = 0


Perturbation = CorruptGroup | BreakRule | SwapDates | ShuffleColumn | GaussianNoise


def n_affected(fraction: float, m: int) -> int:
    """``ceil(fraction * m)``, robust to binary rounding of the product."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    return min(m, max(0, math.ceil(fraction * m - 1e-9)))


def choose_rows(m: int, fraction: float, seed: int) -> np.ndarray:
    """Sorted row indices: ``n_affected`` rows drawn uniformly without replacement."""
    k = n_affected(fraction, m)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(m, size=k, replace=False)) if k else np.empty(0, dtype=int)


def corruption_token(seed: int, row: int) -> str:
    return f"⊥{seed}-{row}"


def perturb(table: Table, p: Perturbation) -> Table:
    """Apply ``p`` to ``table``; the input is not modified."""
    if isinstance(p, CorruptGroup):
        return _corrupt_group(table, p)
    if isinstance(p, BreakRule):
        return _break_rule(table, p)
    if isinstance(p, SwapDates):
        return _swap_dates(table, p)
    if isinstance(p, ShuffleColumn):
        return _shuffle_column(table, p)
    if isinstance(p, GaussianNoise):
        return _gaussian_noise(table, p)
    raise TypeError(f"unknown perturbation {p!r}")


def _require(table: Table, names):
    for n in names:
        if n not in table.schema:
            raise UnknownTargetError(f"table has no column {n!r}")


def _corrupt_group(table, p: CorruptGroup):
    _require(table, p.group.columns)
    first = p.group.columns[0]
    if table.schema.column(first).kind is not Kind.CATEGORICAL:
        raise UnknownTargetError(f"group {p.group.name!r}: first column {first!r} is not categorical")
    values = list(table.column(first))
    for j in choose_rows(table.n_rows, p.fraction, p.seed):
        values[j] = corruption_token(p.seed, int(j))
    return table.with_column(first, values)


def _break_rule(table, p: BreakRule):
    rule = p.rule
    cols = rule.columns
    _require(table, cols)
    schema = table.schema
    fn = compile_expr(rule.expr, schema, rule.tolerance)
    editable = [c for c in cols if schema.column(c).kind is not Kind.CATEGORICAL]
    if not editable:
        raise UnknownTargetError(f"rule {rule.name!r} references no numeric or datetime column")
    base_delta = 10 * rule.tolerance + 1
    columns = {c: list(table.column(c)) for c in editable}
    for j in choose_rows(table.n_rows, p.fraction, p.seed):
        j = int(j)
        row = list(table.row(j))
        if fn(tuple(row)) is not True:
            continue  # already False or undetermined
        broken = _falsify(row, fn, schema, editable, base_delta)
        if broken is None:
            raise UnknownTargetError(f"rule {rule.name!r} cannot be falsified on row {j}")
        name, value = broken
        columns[name][j] = value
    out = table
    for name, values in columns.items():
        out = out.with_column(name, values)
    return out


def _falsify(row, fn, schema, editable, base_delta):
    """Find a single-cell edit making ``fn`` False; shift grows tenfold per attempt."""
    for scale in (1, 10, 100, 1_000, 10_000, 100_000, 1_000_000):
        for name in editable:
            i = schema.index(name)
            kind = schema.column(name).kind
            if row[i] is None:
                continue
            if kind is Kind.DATETIME:
                step = int(round(base_delta * scale * MICROS_PER_DAY))
            elif kind is Kind.INTEGER:
                step = int(math.ceil(base_delta * scale))
            else:
                step = base_delta * scale
            for sign in (1, -1):
                trial = list(row)
                trial[i] = row[i] + sign * step
                if fn(tuple(trial)) is False:
                    return name, trial[i]
    return None


def _swap_dates(table, p: SwapDates):
    cols = [c for c in p.rule.columns if c in table.schema and table.schema.column(c).kind is Kind.DATETIME]
    _require(table, p.rule.columns)
    if len(cols) != 2:
        raise UnknownTargetError(
            f"rule {p.rule.name!r} must reference exactly two datetime columns to swap, found {cols}"
        )
    a, b = cols
    va, vb = list(table.column(a)), list(table.column(b))
    for j in choose_rows(table.n_rows, p.fraction, p.seed):
        va[j], vb[j] = vb[j], va[j]
    return table.with_column(a, va).with_column(b, vb)


def _shuffle_column(table, p: ShuffleColumn):
    _require(table, [p.column])
    values = list(table.column(p.column))
    perm = np.random.default_rng(p.seed).permutation(len(values))
    return table.with_column(p.column, [values[i] for i in perm])


def _gaussian_noise(table, p: GaussianNoise):
    _require(table, p.columns)
    rng = np.random.default_rng(p.seed)
    out = table
    for name in p.columns:
        kind = table.schema.column(name).kind
        if not kind.is_numeric:
            raise UnknownTargetError(f"column {name!r} is not numeric")
        x = table.numeric(name)
        finite = x[~np.isnan(x)]
        scale = p.sigma * (float(finite.std()) if finite.size else 0.0)
        noisy = x + rng.normal(0.0, 1.0, size=x.size) * scale
        if kind is Kind.INTEGER:
            values = [None if np.isnan(v) else int(round(v)) for v in noisy]
        else:
            values = [None if np.isnan(v) else float(v) for v in noisy]
        out = out.with_column(name, values)
    return out


def smote_like(real: Table, n_samples: int, k_neighbors: int = 5, seed: int = 0) -> Table:
    """Interpolate between real rows and their nearest neighbours.

    Each sample picks a base row uniformly among rows whose numeric cells
    are all present, then one of its ``k_neighbors`` nearest such rows
    (Euclidean distance on standardised numeric columns), and sets every
    numeric cell to ``base + u * (neighbour - base)`` with ``u ~ U[0, 1]``.
    Categorical and datetime cells are copied from the base row, so value
    combinations always come from a single real row.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be positive")
    schema = real.schema
    numeric = schema.names_of_kind(Kind.INTEGER, Kind.REAL)
    if not numeric:
        raise InsufficientRowsError("smote_like needs at least one numeric column")
    if n_samples == 0:
        return Table(schema, [()] * len(schema), validate=False)

    x = real.numeric_matrix(numeric)
    complete = np.flatnonzero(np.all(np.isfinite(x), axis=1))
    if complete.size < k_neighbors + 1:
        raise InsufficientRowsError(
            f"need at least {k_neighbors + 1} rows with complete numeric cells, found {complete.size}"
        )
    x = x[complete]
    std = x.std(axis=0)
    z = (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0)

    # k+1 neighbours include the point itself (or a duplicate of it).
    _, nbrs = cKDTree(z).query(z, k=k_neighbors + 1)
    own = np.arange(len(z))[:, None]
    neighbours = np.empty((len(z), k_neighbors), dtype=int)
    for i, row in enumerate(nbrs):
        others = row[row != own[i, 0]]
        neighbours[i] = others[:k_neighbors]

    rng = np.random.default_rng(seed)
    base = rng.integers(len(z), size=n_samples)
    pick = neighbours[base, rng.integers(k_neighbors, size=n_samples)]
    u = rng.random(n_samples)[:, None]
    synth = x[base] + u * (x[pick] - x[base])
    # keep interpolants inside the segment despite rounding
    lo = np.minimum(x[base], x[pick])
    hi = np.maximum(x[base], x[pick])
    synth = np.clip(synth, lo, hi)

    src_rows = complete[base]
    columns = []
    num_pos = {name: i for i, name in enumerate(numeric)}
    for col in schema.columns:
        if col.name in num_pos:
            v = synth[:, num_pos[col.name]]
            if col.kind is Kind.INTEGER:
                columns.append([int(round(t)) for t in v])
            else:
                columns.append([float(t) for t in v])
        else:
            src = real.column(col.name)
            columns.append([src[j] for j in src_rows])
    return Table(schema, columns, validate=False)
