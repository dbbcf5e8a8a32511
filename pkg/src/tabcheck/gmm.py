"""Gaussian mixture models fitted by expectation-maximisation.

Covariances are either full or diagonal and are regularised by ``+eps*I``
after every M-step. All log densities go through a max-shifted
log-sum-exp, so far-out points give large negative values instead of
``-inf``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from tabcheck.errors import DegenerateDataError, DimensionMismatchError, SingularCovarianceError

LOG_2PI = math.log(2.0 * math.pi)
_NK_FLOOR = 10 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class GmmConfig:
    n_components: int = 10
    covariance_kind: str = "diagonal"  # or "full"
    max_iters: int = 200
    rel_tol: float = 1e-6
    cov_regularization: float = 1e-6
    init: str = "kmeans_pp"  # or "random"
    seed: int = 0

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be positive")
        if self.covariance_kind not in ("full", "diagonal"):
            raise ValueError(f"covariance_kind must be 'full' or 'diagonal', not {self.covariance_kind!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not self.cov_regularization > 0:
            raise ValueError("cov_regularization must be > 0")
        if self.init not in ("kmeans_pp", "random"):
            raise ValueError(f"init must be 'kmeans_pp' or 'random', not {self.init!r}")

    def to_dict(self) -> dict:
        return {
            "n_components": self.n_components,
            "covariance_kind": self.covariance_kind,
            "max_iters": self.max_iters,
            "rel_tol": self.rel_tol,
            "cov_regularization": self.cov_regularization,
            "init": self.init,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def fit(cls, data: np.ndarray) -> "Standardizer":
        return cls(data.mean(axis=0), data.std(axis=0))

    def transform(self, data: np.ndarray) -> np.ndarray:
        return (data - self.mean) / self.std


@dataclass(frozen=True, eq=False)
class GmmModel:
    """A fitted mixture.

    ``covariances`` has shape ``(K, d)`` for diagonal models and
    ``(K, d, d)`` for full ones. Inputs to :func:`loglik` and
    :func:`score_samples` pass through ``standardizer`` first.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    covariance_kind: str
    standardizer: Standardizer
    loglik_trace: tuple = ()
    n_iter: int = 0
    converged: bool = False
    _chol: tuple = field(default=(), repr=False)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "covariance_kind": self.covariance_kind,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "standardizer": {
                "mean": self.standardizer.mean.tolist(),
                "std": self.standardizer.std.tolist(),
            },
            "n_iter": self.n_iter,
            "converged": self.converged,
            "loglik_trace": list(self.loglik_trace),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmModel":
        return make_model(
            np.asarray(d["weights"], dtype=float),
            np.asarray(d["means"], dtype=float),
            np.asarray(d["covariances"], dtype=float),
            d["covariance_kind"],
            Standardizer(
                np.asarray(d["standardizer"]["mean"], dtype=float),
                np.asarray(d["standardizer"]["std"], dtype=float),
            ),
            loglik_trace=tuple(d.get("loglik_trace", ())),
            n_iter=d.get("n_iter", 0),
            converged=d.get("converged", False),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def make_model(weights, means, covariances, covariance_kind="full", standardizer=None, **extra) -> GmmModel:
    """Build a model from explicit parameters (validates and factorises covariances)."""
    weights = np.asarray(weights, dtype=float)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    covariances = np.asarray(covariances, dtype=float)
    k, d = means.shape
    if weights.shape != (k,):
        raise ValueError(f"weights shape {weights.shape} does not match {k} components")
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to 1")
    expected = (k, d) if covariance_kind == "diagonal" else (k, d, d)
    if covariances.shape != expected:
        raise ValueError(f"covariances shape {covariances.shape}, expected {expected}")
    if standardizer is None:
        standardizer = Standardizer.identity(d)
    chol = _factorize(covariances, covariance_kind)
    return GmmModel(weights, means, covariances, covariance_kind, standardizer, _chol=chol, **extra)


def _factorize(covariances, kind) -> tuple:
    if kind == "diagonal":
        if np.any(covariances <= 0):
            raise SingularCovarianceError("diagonal covariance has a non-positive entry")
        return ()
    out = []
    for k, cov in enumerate(covariances):
        try:
            out.append(np.linalg.cholesky(cov))
        except np.linalg.LinAlgError:
            raise SingularCovarianceError(f"covariance of component {k} is not positive definite") from None
    return tuple(out)


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(under="ignore"):
        return np.log(np.exp(a - m[:, None]).sum(axis=1)) + m


def _component_logpdf(x: np.ndarray, means, covariances, kind, chol) -> np.ndarray:
    """``(n, K)`` matrix of ``log N(x_j | mu_k, Sigma_k)``."""
    n, d = x.shape
    k = means.shape[0]
    out = np.empty((n, k))
    if kind == "diagonal":
        for c in range(k):
            var = covariances[c]
            diff = x - means[c]
            maha = np.sum(diff * diff / var, axis=1)
            out[:, c] = -0.5 * (d * LOG_2PI + np.sum(np.log(var)) + maha)
    else:
        for c in range(k):
            low = chol[c]
            y = solve_triangular(low, (x - means[c]).T, lower=True, check_finite=False)
            maha = np.sum(y * y, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(low)))
            out[:, c] = -0.5 * (d * LOG_2PI + logdet + maha)
    return out


def _weighted_logpdf(model_parts, x):
    weights, means, covariances, kind, chol = model_parts
    return _component_logpdf(x, means, covariances, kind, chol) + np.log(weights)


def score_samples(model: GmmModel, data) -> np.ndarray:
    """Per-row mixture log-likelihoods of ``data`` (rows in input space)."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.dim:
        raise DimensionMismatchError(f"data has dimension {x.shape[1]}, model has {model.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contains non-finite values")
    z = model.standardizer.transform(x)
    parts = (model.weights, model.means, model.covariances, model.covariance_kind, model._chol)
    return _logsumexp_rows(_weighted_logpdf(parts, z))


def loglik(model: GmmModel, row) -> float:
    """``log sum_k pi_k N(row | mu_k, Sigma_k)`` for a single row."""
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise DimensionMismatchError("loglik expects a single row vector")
    return float(score_samples(model, row)[0])


# --- EM ---------------------------------------------------------------------


def _kmeans_pp_centers(x, k, rng) -> np.ndarray:
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((x - x[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return x[idx].copy()


def _global_cov(x, kind, eps):
    diff = x - x.mean(axis=0)
    if kind == "diagonal":
        return np.mean(diff * diff, axis=0) + eps
    return diff.T @ diff / x.shape[0] + eps * np.eye(x.shape[1])


def _m_step(x, resp, kind, eps):
    n, d = x.shape
    nk = resp.sum(axis=0) + _NK_FLOOR
    weights = nk / nk.sum()
    means = (resp.T @ x) / nk[:, None]
    k = resp.shape[1]
    if kind == "diagonal":
        cov = np.empty((k, d))
        for c in range(k):
            diff = x - means[c]
            cov[c] = (resp[:, c] @ (diff * diff)) / nk[c] + eps
    else:
        cov = np.empty((k, d, d))
        eye = np.eye(d)
        for c in range(k):
            diff = x - means[c]
            cov[c] = (resp[:, c, None] * diff).T @ diff / nk[c] + eps * eye
            cov[c] = 0.5 * (cov[c] + cov[c].T)
    return weights, means, cov


def _initial_params(x, config, rng):
    n = x.shape[0]
    k = config.n_components
    eps = config.cov_regularization
    kind = config.covariance_kind
    if config.init == "kmeans_pp":
        centers = _kmeans_pp_centers(x, k, rng)
    else:
        centers = x[rng.choice(n, size=k, replace=False)].copy()
    d2 = np.stack([np.sum((x - c) ** 2, axis=1) for c in centers], axis=1)
    labels = np.argmin(d2, axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    weights, means, cov = _m_step(x, resp, kind, eps)
    empty = resp.sum(axis=0) == 0
    if np.any(empty):
        glob = _global_cov(x, kind, eps)
        for c in np.flatnonzero(empty):
            means[c] = centers[c]
            cov[c] = glob
    return weights, means, cov


def fit_gmm(data, config: GmmConfig = GmmConfig()) -> GmmModel:
    """Fit a mixture by EM until the relative log-likelihood gain drops below ``rel_tol``.

    The returned model carries an identity standardizer and the total
    log-likelihood after initialisation and after every EM iteration in
    ``loglik_trace``.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] == 0:
        raise DegenerateDataError("data must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(x)):
        raise DegenerateDataError("data contains non-finite values")
    n, d = x.shape
    if n < config.n_components:
        raise DegenerateDataError(f"{n} rows cannot support {config.n_components} components")

    rng = np.random.default_rng(config.seed)
    kind = config.covariance_kind
    eps = config.cov_regularization

    weights, means, cov = _initial_params(x, config, rng)
    chol = _factorize(cov, kind)
    log_prob = _weighted_logpdf((weights, means, cov, kind, chol), x)
    row_ll = _logsumexp_rows(log_prob)
    ll = float(np.sum(row_ll))
    trace = [ll]
    converged = False
    n_iter = 0
    for n_iter in range(1, config.max_iters + 1):
        resp = np.exp(log_prob - row_ll[:, None])
        step = _m_step(x, resp, kind, eps)
        step_chol = _factorize(step[2], kind)
        step_log_prob = _weighted_logpdf((*step, kind, step_chol), x)
        step_row_ll = _logsumexp_rows(step_log_prob)
        new_ll = float(np.sum(step_row_ll))
        if new_ll < ll:
            # The +eps*I shrinkage makes the M-step inexact; a drop means we
            # sit at the regularised fixed point, so keep the last iterate.
            n_iter -= 1
            converged = True
            break
        weights, means, cov = step
        chol, log_prob, row_ll = step_chol, step_log_prob, step_row_ll
        trace.append(new_ll)
        if abs(new_ll - ll) <= config.rel_tol * abs(ll):
            converged = True
            break
        ll = new_ll

    return GmmModel(
        weights,
        means,
        cov,
        kind,
        Standardizer.identity(d),
        loglik_trace=tuple(trace),
        n_iter=n_iter,
        converged=converged,
        _chol=chol,
    )


def with_standardizer(model: GmmModel, standardizer: Standardizer) -> GmmModel:
    return replace(model, standardizer=standardizer)
