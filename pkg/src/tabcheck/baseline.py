"""Low-order statistical baselines: density, pairwise correlation, coverage.

Conventions (all scores in [0, 100]):

* density: per numeric column ``1 - KS`` (two-sample Kolmogorov-Smirnov
  statistic), per categorical column ``1 - TV`` (total variation distance
  of category frequencies); mean over columns.
* correlation: association matrix over all column pairs using Pearson r
  (numeric/numeric), Cramer's V (categorical/categorical) and the
  correlation ratio eta (mixed); ``1 - mean |A_real - A_syn| / 2``.
* coverage: per numeric column the share of the real range covered by the
  synthetic range, per categorical column the share of real categories
  present; mean over columns.

Datetime columns are treated as numeric. Nulls are ignored per column (per
pair for correlation).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from tabcheck.data import Kind, Table
from tabcheck.errors import EmptyTableError, SchemaMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineResult:
    density: float
    correlation: float
    coverage: float
    per_column: dict = field(default_factory=dict)  # name -> {"density": .., "coverage": ..}
    per_pair: dict = field(default_factory=dict)  # "a|b" -> {"real": .., "syn": ..}


def _check_tables(real: Table, syn: Table):
    if real.n_rows == 0:
        raise EmptyTableError("real table has no rows")
    if syn.n_rows == 0:
        raise EmptyTableError("synthetic table has no rows")
    for col in real.schema.columns:
        if col.name not in syn.schema:
            raise SchemaMismatchError(f"synthetic table lacks column {col.name!r}")
        if syn.schema.column(col.name).kind is not col.kind:
            raise SchemaMismatchError(f"column {col.name!r} has different kinds in real and synthetic")


def _values(table: Table, name: str):
    """Non-null values: float array for numeric-like columns, list of str otherwise."""
    if table.schema.column(name).kind is Kind.CATEGORICAL:
        return [v for v in table.column(name) if v is not None]
    x = table.numeric(name)
    return x[~np.isnan(x)]


def ks_statistic(a, b) -> float:
    """Two-sample KS statistic: sup |F_a - F_b| over the pooled sample."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs two non-empty samples")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def tv_distance(a, b) -> float:
    """Total variation distance between the category frequencies of two samples."""
    if not a or not b:
        raise ValueError("TV distance needs two non-empty samples")
    ca, cb = {}, {}
    for v in a:
        ca[v] = ca.get(v, 0) + 1
    for v in b:
        cb[v] = cb.get(v, 0) + 1
    na, nb = len(a), len(b)
    # fsum is exactly rounded, so set iteration order (hash seed) cannot leak in
    return 0.5 * math.fsum(abs(ca.get(k, 0) / na - cb.get(k, 0) / nb) for k in ca.keys() | cb.keys())


def _density(real: Table, syn: Table):
    _check_tables(real, syn)
    per = {}
    for col in real.schema.columns:
        r = _values(real, col.name)
        s = _values(syn, col.name)
        if len(r) == 0 and len(s) == 0:
            continue
        if len(r) == 0 or len(s) == 0:
            per[col.name] = 0.0
        elif col.kind is Kind.CATEGORICAL:
            per[col.name] = 100.0 * (1.0 - tv_distance(r, s))
        else:
            per[col.name] = 100.0 * (1.0 - ks_statistic(r, s))
    if not per:
        raise EmptyTableError("no column has any non-null value")
    return float(np.mean(list(per.values()))), per


def density_score(real: Table, syn: Table) -> float:
    return _density(real, syn)[0]


# --- associations -----------------------------------------------------------


def _constant(v: np.ndarray) -> bool:
    # exact test; the mean of equal floats can differ from them by an ulp
    return v.size == 0 or bool(np.all(v == v[0]))


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    if _constant(x) or _constant(y):
        return 0.0
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(dx, dy) / denom, -1.0, 1.0))


def cramers_v(a: np.ndarray, b: np.ndarray) -> float:
    """Cramer's V (no bias correction) of two integer-coded samples."""
    _, a = np.unique(a, return_inverse=True)
    _, b = np.unique(b, return_inverse=True)
    r, c = a.max() + 1, b.max() + 1
    if min(r, c) < 2:
        return 0.0
    n = a.size
    table = np.bincount(a * c + b, minlength=r * c).reshape(r, c).astype(float)
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    chi2 = float(np.sum((table - expected) ** 2 / expected))
    return float(np.sqrt(chi2 / n / (min(r, c) - 1)))


def correlation_ratio(codes: np.ndarray, y: np.ndarray) -> float:
    """Correlation ratio eta of numeric ``y`` given integer category ``codes``."""
    if _constant(y):
        return 0.0
    _, codes = np.unique(codes, return_inverse=True)
    mean = y.mean()
    ss_total = float(np.sum((y - mean) ** 2))
    if ss_total == 0:
        return 0.0
    counts = np.bincount(codes)
    sums = np.bincount(codes, weights=y)
    nz = counts > 0
    group_means = sums[nz] / counts[nz]
    ss_between = float(np.sum(counts[nz] * (group_means - mean) ** 2))
    return float(np.sqrt(min(1.0, ss_between / ss_total)))


def _encode(table: Table):
    enc = {}
    for col in table.schema.columns:
        if col.kind is Kind.CATEGORICAL:
            lookup = {}
            codes = np.array(
                [-1 if v is None else lookup.setdefault(v, len(lookup)) for v in table.column(col.name)],
                dtype=np.int64,
            )
            enc[col.name] = ("cat", codes, codes >= 0)
        else:
            x = table.numeric(col.name)
            enc[col.name] = ("num", x, ~np.isnan(x))
    return enc


def _association(ea, eb) -> float:
    ka, xa, ma = ea
    kb, xb, mb = eb
    mask = ma & mb
    if mask.sum() < 2:
        return 0.0
    xa, xb = xa[mask], xb[mask]
    if ka == "num" and kb == "num":
        return pearson(xa, xb)
    if ka == "cat" and kb == "cat":
        return cramers_v(xa, xb)
    if ka == "cat":
        return correlation_ratio(xa, xb)
    return correlation_ratio(xb, xa)


def association_matrix(table: Table, names=None) -> dict:
    """Pairwise associations keyed by ``(a, b)`` in schema order."""
    names = list(names) if names is not None else table.schema.names
    enc = _encode(table)
    constant = [
        n for n in names
        if len(set(enc[n][1][enc[n][2]].tolist())) < 2
    ]
    if constant:
        logger.warning("constant columns get association 0: %s", constant)
    return {(a, b): _association(enc[a], enc[b]) for a, b in combinations(names, 2)}


def _correlation(real: Table, syn: Table):
    _check_tables(real, syn)
    names = real.schema.names
    if len(names) < 2:
        raise ValueError("correlation score needs at least two columns")
    ar = association_matrix(real, names)
    as_ = association_matrix(syn, names)
    per = {f"{a}|{b}": {"real": ar[(a, b)], "syn": as_[(a, b)]} for a, b in ar}
    gaps = [abs(ar[p] - as_[p]) / 2.0 for p in ar]
    return 100.0 * (1.0 - float(np.mean(gaps))), per


def correlation_score(real: Table, syn: Table) -> float:
    return _correlation(real, syn)[0]


# --- coverage ---------------------------------------------------------------


def _coverage(real: Table, syn: Table):
    _check_tables(real, syn)
    per = {}
    for col in real.schema.columns:
        r = _values(real, col.name)
        s = _values(syn, col.name)
        if len(r) == 0:
            continue
        if len(s) == 0:
            per[col.name] = 0.0
        elif col.kind is Kind.CATEGORICAL:
            rs = set(r)
            per[col.name] = 100.0 * len(rs & set(s)) / len(rs)
        else:
            lo, hi = float(r.min()), float(r.max())
            if hi == lo:
                per[col.name] = 100.0
            else:
                overlap = min(hi, float(s.max())) - max(lo, float(s.min()))
                per[col.name] = 100.0 * max(0.0, overlap) / (hi - lo)
    if not per:
        raise EmptyTableError("real table has no non-null values")
    return float(np.mean(list(per.values()))), per


def coverage_score(real: Table, syn: Table) -> float:
    return _coverage(real, syn)[0]


def baseline(real: Table, syn: Table, which=("density", "correlation", "coverage")) -> BaselineResult:
    """Compute the requested baselines with per-column and per-pair breakdowns."""
    per_column: dict = {}
    scores = {"density": float("nan"), "correlation": float("nan"), "coverage": float("nan")}
    per_pair = {}
    if "density" in which:
        scores["density"], dens = _density(real, syn)
        for k, v in dens.items():
            per_column.setdefault(k, {})["density"] = v
    if "coverage" in which:
        scores["coverage"], cov = _coverage(real, syn)
        for k, v in cov.items():
            per_column.setdefault(k, {})["coverage"] = v
    if "correlation" in which:
        scores["correlation"], per_pair = _correlation(real, syn)
    return BaselineResult(scores["density"], scores["correlation"], scores["coverage"], per_column, per_pair)
