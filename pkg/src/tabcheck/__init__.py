"""Metrics for how well synthetic tables preserve inter-column logic.

* :func:`tabcheck.consistency.hcs` -- hierarchical consistency of column groups
* :func:`tabcheck.dependency.mdi` -- satisfaction of row-level dependency rules
* :func:`tabcheck.dsi.dsi` -- per-row likelihood agreement under a real-fitted GMM
* :mod:`tabcheck.baseline` -- density, correlation and coverage baselines
"""

__version__ = "0.1.0"

from tabcheck.baseline import BaselineResult, baseline, correlation_score, coverage_score, density_score
from tabcheck.consistency import HcsResult, hcs, infer_valid_tuples
from tabcheck.data import Column, CsvOptions, Kind, Schema, Table, load_schema, load_table, parse_datetime, parse_schema
from tabcheck.dependency import MdiResult, mdi
from tabcheck.dsi import DsiResult, dsi
from tabcheck.expr import eval_expr, parse_expr, to_source
from tabcheck.gmm import GmmConfig, GmmModel, fit_gmm, loglik, score_samples
from tabcheck.report import EvalConfig, MetricReport, emit_report, evaluate, run_eval
from tabcheck.rulespec import ConsistencyGroup, DependencyRule, ValidTupleSet, parse_rules, parse_rules_text

__all__ = [
    "BaselineResult", "baseline", "correlation_score", "coverage_score", "density_score",
    "HcsResult", "hcs", "infer_valid_tuples",
    "Column", "CsvOptions", "Kind", "Schema", "Table", "load_schema", "load_table",
    "parse_datetime", "parse_schema",
    "MdiResult", "mdi", "DsiResult", "dsi",
    "eval_expr", "parse_expr", "to_source",
    "GmmConfig", "GmmModel", "fit_gmm", "loglik", "score_samples",
    "EvalConfig", "MetricReport", "emit_report", "evaluate", "run_eval",
    "ConsistencyGroup", "DependencyRule", "ValidTupleSet", "parse_rules", "parse_rules_text",
]
