"""Distributional Similarity Index.

A mixture is fitted to the real data after standardising each column by
the real data's mean and standard deviation. The reference level is the
mean per-row log-likelihood of the real rows. Every synthetic row scores

    clamp(1 - |loglik(row) - reference| / |reference|, 0, 1)

and the index is 100 times the mean score.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from tabcheck.data import Kind, Table
from tabcheck.errors import DegenerateDataError, SchemaMismatchError
from tabcheck.gmm import GmmConfig, GmmModel, Standardizer, fit_gmm, score_samples, with_standardizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DsiResult:
    overall: float
    term_min: float
    term_max: float
    term_mean: float
    reference_loglik: float
    columns: tuple
    n_real_rows: int
    n_syn_rows: int
    real_rows_dropped: int = 0
    syn_rows_dropped: int = 0
    dropped_columns: tuple = ()
    model: GmmModel | None = field(default=None, repr=False, compare=False)


def default_dsi_columns(table: Table) -> list[str]:
    return table.schema.names_of_kind(Kind.INTEGER, Kind.REAL)


def _frequency_encode(real: Table, syn: Table, name: str):
    values = [v for v in real.column(name) if v is not None]
    freq = {}
    for v in values:
        freq[v] = freq.get(v, 0) + 1
    total = len(values) or 1

    def enc(col):
        return np.array(
            [np.nan if v is None else freq.get(v, 0) / total for v in col], dtype=np.float64
        )

    return enc(real.column(name)), enc(syn.column(name))


def dsi_terms(model: GmmModel, real_x: np.ndarray, syn_x: np.ndarray):
    """Return (per-row terms, reference log-likelihood) for prepared matrices."""
    ref = float(np.mean(score_samples(model, real_x)))
    if ref == 0.0:
        raise DegenerateDataError("reference log-likelihood is exactly zero")
    syn_ll = score_samples(model, syn_x)
    terms = np.clip(1.0 - np.abs(syn_ll - ref) / abs(ref), 0.0, 1.0)
    return terms, ref


def dsi(
    real: Table,
    syn: Table,
    numeric_columns: list[str] | None = None,
    config: GmmConfig = GmmConfig(),
    categorical_columns: list[str] = (),
) -> DsiResult:
    """Score how typical each synthetic row is under a mixture fitted to ``real``.

    ``numeric_columns`` defaults to every integer and real column. Datetime
    columns may be listed and enter as seconds. ``categorical_columns`` are
    frequency-encoded (category -> its relative frequency in ``real``).
    Rows with a null in any selected column are dropped from both the fit
    and the scores; zero-variance columns are dropped with a warning.
    """
    if numeric_columns is None:
        numeric_columns = default_dsi_columns(real)
    numeric_columns = list(numeric_columns)
    categorical_columns = list(categorical_columns)
    for name in numeric_columns + categorical_columns:
        for label, t in (("real", real), ("synthetic", syn)):
            if name not in t.schema:
                raise SchemaMismatchError(f"{label} table has no column {name!r}")
    for name in numeric_columns:
        if real.schema.column(name).kind is Kind.CATEGORICAL:
            raise SchemaMismatchError(f"column {name!r} is categorical; list it under categorical_columns")
    names = numeric_columns + categorical_columns
    if not names:
        raise DegenerateDataError("no columns selected for DSI")

    real_x = real.numeric_matrix(numeric_columns)
    syn_x = syn.numeric_matrix(numeric_columns)
    if categorical_columns:
        enc = [_frequency_encode(real, syn, c) for c in categorical_columns]
        real_x = np.column_stack([real_x] + [r for r, _ in enc])
        syn_x = np.column_stack([syn_x] + [s for _, s in enc])

    real_keep = np.all(np.isfinite(real_x), axis=1)
    syn_keep = np.all(np.isfinite(syn_x), axis=1)
    real_x = real_x[real_keep]
    syn_x = syn_x[syn_keep]
    if syn_x.shape[0] == 0:
        raise DegenerateDataError("synthetic table has no complete rows on the DSI columns")
    if real_x.shape[0] < config.n_components:
        raise DegenerateDataError(
            f"real table has {real_x.shape[0]} complete rows, fewer than {config.n_components} components"
        )

    std = real_x.std(axis=0)
    keep = std > 0
    dropped = tuple(n for n, k in zip(names, keep) if not k)
    if dropped:
        msg = f"DSI: dropping zero-variance columns {list(dropped)}"
        warnings.warn(msg, stacklevel=2)
        logger.warning(msg)
    if not np.any(keep):
        raise DegenerateDataError("every DSI column has zero variance in the real data")
    real_x = real_x[:, keep]
    syn_x = syn_x[:, keep]
    used = tuple(n for n, k in zip(names, keep) if k)

    scaler = Standardizer.fit(real_x)
    model = fit_gmm(scaler.transform(real_x), config)
    model = with_standardizer(model, scaler)
    terms, ref = dsi_terms(model, real_x, syn_x)
    return DsiResult(
        overall=100.0 * float(np.mean(terms)),
        term_min=float(terms.min()),
        term_max=float(terms.max()),
        term_mean=float(np.mean(terms)),
        reference_loglik=ref,
        columns=used,
        n_real_rows=int(real_x.shape[0]),
        n_syn_rows=int(syn_x.shape[0]),
        real_rows_dropped=int((~real_keep).sum()),
        syn_rows_dropped=int((~syn_keep).sum()),
        dropped_columns=dropped,
        model=model,
    )
