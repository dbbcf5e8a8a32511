"""Repeated evaluation protocol and report serialisation.

Each repeat ``r`` uses seed ``base_seed + r``. With ``subsample_fraction``
below 1 the synthetic table is replaced by a seeded row subsample; the GMM
behind DSI is always refitted with the repeat's seed. Metrics that do not
depend on the seed (everything but DSI) are computed once when no
subsampling happens, so their repeat values are identical and their
standard deviation is exactly zero.

Standard deviations are population standard deviations.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from tabcheck.baseline import _correlation, _coverage, _density
from tabcheck.consistency import hcs, reference_tuples
from tabcheck.data import CsvOptions, Kind, Schema, Table, format_datetime, load_schema, load_table
from tabcheck.dependency import mdi
from tabcheck.dsi import dsi
from tabcheck.gmm import GmmConfig
from tabcheck.harness import choose_rows
from tabcheck.rulespec import RuleSet, parse_rules

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ALL_METRICS = ("hcs", "mdi", "dsi", "density", "correlation", "coverage")
DISPLAY_NAMES = {
    "hcs": "HCS",
    "mdi": "MDI",
    "dsi": "DSI",
    "density": "Density",
    "correlation": "Correlation",
    "coverage": "Coverage",
}
SEEDED_METRICS = {"dsi"}


@dataclass(frozen=True)
class EvalConfig:
    real_path: Path | None = None
    syn_path: Path | None = None
    schema_path: Path | None = None
    rules_path: Path | None = None
    repeats: int = 10
    subsample_fraction: float = 1.0
    base_seed: int = 0
    gmm: GmmConfig = GmmConfig()
    metrics: tuple = ALL_METRICS
    dsi_columns: tuple | None = None
    dsi_categorical: tuple = ()
    threads: int | None = None
    gmm_dump_path: Path | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must lie in (0, 1]")
        metrics = tuple(self.metrics)
        if not metrics:
            raise ValueError("select at least one metric")
        unknown = [m for m in metrics if m not in ALL_METRICS]
        if unknown:
            raise ValueError(f"unknown metrics {unknown}; choose from {list(ALL_METRICS)}")
        # canonical order, no duplicates
        object.__setattr__(self, "metrics", tuple(m for m in ALL_METRICS if m in metrics))

    def to_dict(self) -> dict:
        def path(p):
            return None if p is None else str(p)

        return {
            "real_path": path(self.real_path),
            "syn_path": path(self.syn_path),
            "schema_path": path(self.schema_path),
            "rules_path": path(self.rules_path),
            "repeats": self.repeats,
            "subsample_fraction": self.subsample_fraction,
            "base_seed": self.base_seed,
            "gmm": self.gmm.to_dict(),
            "metrics": list(self.metrics),
            "dsi_columns": None if self.dsi_columns is None else list(self.dsi_columns),
            "dsi_categorical": list(self.dsi_categorical),
            "std": "population",
        }


@dataclass
class MetricSummary:
    name: str
    values: list
    mean: float
    std: float
    details: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)


@dataclass
class MetricReport:
    metrics: dict  # name -> MetricSummary
    failures: dict = field(default_factory=dict)  # name -> message
    config: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def ok(self) -> bool:
        requested = self.config.get("metrics", list(self.metrics))
        return not self.failures and all(m in self.metrics for m in requested)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "schema_version": self.schema_version,
            "config": self.config,
            "data": self.data,
            "metrics": {k: asdict(v) for k, v in self.metrics.items()},
            "failures": self.failures,
        }
        if include_timing:
            d["timing"] = self.timing
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            metrics={k: MetricSummary(**v) for k, v in d["metrics"].items()},
            failures=d.get("failures", {}),
            config=d.get("config", {}),
            data=d.get("data", {}),
            timing=d.get("timing", {}),
            schema_version=d.get("schema_version", SCHEMA_VERSION),
        )


def summarize(values) -> tuple[float, float]:
    """Mean and population standard deviation; exact zero spread for equal values."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("no values to summarise")
    if all(v == values[0] for v in values):
        return values[0], 0.0
    n = len(values)
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / n)
    return mean, std


def _json_value(v, col):
    if v is None:
        return None
    if col is not None and col.kind is Kind.DATETIME:
        return format_datetime(v, col.datetime_format)
    return v


def _thread_count(config: EvalConfig) -> int:
    if config.threads is not None:
        return max(1, config.threads)
    env = os.environ.get("TABCHECK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer TABCHECK_THREADS=%r", env)
    return os.cpu_count() or 1


# --- per-metric evaluation -----------------------------------------------------


def _eval_hcs(ctx, syn):
    res = hcs(syn, ctx["groups"], ctx["valid"])
    schema = syn.schema
    details = {
        "per_group": {
            k: {"valid_count": g.valid_count, "row_count": g.row_count, "score": g.score}
            for k, g in res.per_group.items()
        }
    }
    violations = [
        {
            "row": v.row,
            "group": v.name,
            "values": [_json_value(x, schema.column(c)) for x, c in zip(v.values, ctx["group_cols"][v.name])],
        }
        for v in res.violations
    ]
    return res.overall, details, violations


def _eval_mdi(ctx, syn):
    res = mdi(syn, ctx["rules"])
    schema = syn.schema
    details = {
        "per_rule": {
            k: {
                "satisfied_count": r.satisfied_count,
                "row_count": r.row_count,
                "score": r.score,
                "undetermined_count": r.undetermined_count,
            }
            for k, r in res.per_rule.items()
        }
    }
    violations = [
        {
            "row": v.row,
            "rule": v.name,
            "values": {c: _json_value(x, schema.column(c)) for c, x in v.values.items()},
            "undetermined": v.undetermined,
        }
        for v in res.violations
    ]
    return res.overall, details, violations


def _eval_dsi(ctx, syn, seed):
    config = ctx["config"]
    res = dsi(
        ctx["real"],
        syn,
        list(config.dsi_columns) if config.dsi_columns is not None else None,
        replace(config.gmm, seed=seed),
        list(config.dsi_categorical),
    )
    details = {
        "reference_loglik": res.reference_loglik,
        "term_min": res.term_min,
        "term_max": res.term_max,
        "term_mean": res.term_mean,
        "columns": list(res.columns),
        "dropped_columns": list(res.dropped_columns),
        "n_real_rows": res.n_real_rows,
        "n_syn_rows": res.n_syn_rows,
        "real_rows_dropped": res.real_rows_dropped,
        "syn_rows_dropped": res.syn_rows_dropped,
        "gmm_iterations": res.model.n_iter,
        "gmm_converged": res.model.converged,
    }
    return res.overall, details, [], res.model


def _eval_baseline(which, ctx, syn):
    fn = {"density": _density, "correlation": _correlation, "coverage": _coverage}[which]
    score, breakdown = fn(ctx["real"], syn)
    key = "per_pair" if which == "correlation" else "per_column"
    return score, {key: breakdown}, []


def _evaluate_metric(name, ctx, syn, seed):
    """Return (value, details, violations, model-or-None)."""
    if name == "hcs":
        if ctx["hcs_error"] is not None:
            raise ctx["hcs_error"]
        return (*_eval_hcs(ctx, syn), None)
    if name == "mdi":
        if not ctx["rules"]:
            raise ValueError("rule file defines no dependency rules")
        return (*_eval_mdi(ctx, syn), None)
    if name == "dsi":
        return _eval_dsi(ctx, syn, seed)
    return (*_eval_baseline(name, ctx, syn), None)


def evaluate(real: Table, syn: Table, ruleset: RuleSet | None, config: EvalConfig) -> MetricReport:
    """Run the repeat protocol on in-memory tables."""
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    groups = list(ruleset.groups) if ruleset is not None else []
    rules = list(ruleset.rules) if ruleset is not None else []
    ctx = {
        "real": real,
        "config": config,
        "groups": groups,
        "rules": rules,
        "group_cols": {g.name: g.columns for g in groups},
        "valid": None,
        "hcs_error": None,
    }
    if "hcs" in config.metrics:
        try:
            if not groups:
                raise ValueError("rule file defines no consistency groups")
            ctx["valid"] = [reference_tuples(real, g) for g in groups]
        except Exception as exc:  # reported as a metric failure
            ctx["hcs_error"] = exc

    m = syn.n_rows
    full = config.subsample_fraction >= 1.0
    seeds = [config.base_seed + r for r in range(config.repeats)]
    elapsed: dict = {name: 0.0 for name in config.metrics}
    failures: dict = {}
    results: dict = {name: [None] * config.repeats for name in config.metrics}

    def syn_for(seed):
        if full:
            return syn
        return syn.take(choose_rows(m, config.subsample_fraction, seed))

    def run(name, r):
        seed = seeds[r]
        t = time.perf_counter()
        try:
            out = _evaluate_metric(name, ctx, syn_for(seed), seed)
        except Exception as exc:
            out = exc
        return name, r, out, time.perf_counter() - t

    jobs = []
    for name in config.metrics:
        if full and name not in SEEDED_METRICS:
            jobs.append((name, 0))
        else:
            jobs.extend((name, r) for r in range(config.repeats))

    threads = min(_thread_count(config), len(jobs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(lambda job: run(*job), jobs))
    else:
        outputs = [run(*job) for job in jobs]

    for name, r, out, dt in outputs:
        elapsed[name] += dt
        if isinstance(out, Exception):
            failures.setdefault(name, f"{type(out).__name__}: {out}")
            continue
        results[name][r] = out
        if full and name not in SEEDED_METRICS:
            for rr in range(1, config.repeats):
                results[name][rr] = out

    summaries = {}
    model_to_dump = None
    for name in config.metrics:
        if name in failures:
            continue
        runs = results[name]
        values = [float(o[0]) for o in runs]
        mean, std = summarize(values)
        details = dict(runs[0][1])
        if name == "dsi":
            details["reference_loglik"] = [o[1]["reference_loglik"] for o in runs]
            model_to_dump = runs[0][3]
        summaries[name] = MetricSummary(name, values, mean, std, details, runs[0][2])

    if config.gmm_dump_path is not None and model_to_dump is not None:
        Path(config.gmm_dump_path).write_text(model_to_dump.to_json(), encoding="utf-8")

    rows_evaluated = [m if full else len(choose_rows(m, config.subsample_fraction, s)) for s in seeds]
    return MetricReport(
        metrics=summaries,
        failures=failures,
        config=config.to_dict(),
        data={
            "real_rows": real.n_rows,
            "syn_rows": m,
            "rows_evaluated": rows_evaluated,
            "columns": len(syn.schema),
            "groups": [g.name for g in groups],
            "rules": [r.name for r in rules],
        },
        timing={
            "started": started,
            "elapsed_s": time.perf_counter() - t0,
            "per_metric_s": elapsed,
            "threads": threads,
        },
    )


def run_eval(config: EvalConfig, csv_options: CsvOptions = CsvOptions()) -> MetricReport:
    """Load the configured files and run :func:`evaluate`."""
    if config.schema_path is None or config.real_path is None or config.syn_path is None:
        raise ValueError("real_path, syn_path and schema_path are required")
    schema: Schema = load_schema(config.schema_path)
    real = load_table(config.real_path, schema, csv_options)
    syn = load_table(config.syn_path, schema, csv_options)
    ruleset = parse_rules(config.rules_path, schema) if config.rules_path is not None else None
    return evaluate(real, syn, ruleset, config)


def emit_report(report: MetricReport, fmt: str = "json", include_timing: bool = True) -> str:
    """Serialise a report as JSON (stable, sorted keys) or as ``NAME mean±std`` text lines."""
    if fmt == "json":
        return json.dumps(report.to_dict(include_timing), indent=2, sort_keys=True) + "\n"
    if fmt == "text":
        lines = []
        for name in ALL_METRICS:
            if name in report.metrics:
                s = report.metrics[name]
                lines.append(f"{DISPLAY_NAMES[name]} {s.mean:.2f}±{s.std:.2f}")
        for name, msg in sorted(report.failures.items()):
            lines.append(f"{DISPLAY_NAMES.get(name, name)} FAILED: {msg}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> MetricReport:
    return MetricReport.from_dict(json.loads(text))
