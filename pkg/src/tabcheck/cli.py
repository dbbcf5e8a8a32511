"""``tabcheck`` command-line interface."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from tabcheck import __version__
from tabcheck.data import load_schema, load_table, write_table
from tabcheck.errors import TabcheckError
from tabcheck.gmm import GmmConfig
from tabcheck.harness import (
    BreakRule,
    CorruptGroup,
    GaussianNoise,
    ShuffleColumn,
    SwapDates,
    perturb,
    smote_like,
)
from tabcheck.report import ALL_METRICS, EvalConfig, emit_report, run_eval
from tabcheck.rulespec import parse_rules

EXIT_OK = 0
EXIT_METRIC_FAILED = 1
EXIT_ERROR = 2


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_eval(sub):
    p = sub.add_parser("eval", help="score a synthetic table against a real one")
    p.add_argument("--real", required=True, type=Path)
    p.add_argument("--syn", required=True, type=Path)
    p.add_argument("--schema", required=True, type=Path)
    p.add_argument("--rules", type=Path, help="rule file (needed for hcs and mdi)")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--subsample", type=float, default=1.0, help="fraction of synthetic rows per repeat")
    p.add_argument("--metrics", type=_csv_list, default=list(ALL_METRICS))
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from JSON")
    g = p.add_argument_group("DSI mixture model")
    g.add_argument("--gmm-components", type=int, default=GmmConfig.n_components)
    g.add_argument("--gmm-covariance", choices=("diagonal", "full"), default=GmmConfig.covariance_kind)
    g.add_argument("--gmm-max-iters", type=int, default=GmmConfig.max_iters)
    g.add_argument("--gmm-tol", type=float, default=GmmConfig.rel_tol)
    g.add_argument("--gmm-reg", type=float, default=GmmConfig.cov_regularization)
    g.add_argument("--gmm-init", choices=("kmeans_pp", "random"), default=GmmConfig.init)
    g.add_argument("--dsi-columns", type=_csv_list, help="numeric columns for DSI (default: all numeric)")
    g.add_argument("--dsi-categorical", type=_csv_list, default=[], help="categorical columns, frequency-encoded")
    g.add_argument("--dump-gmm", type=Path, help="write the first repeat's fitted mixture as JSON")
    p.set_defaults(func=cmd_eval)


def cmd_eval(args) -> int:
    config = EvalConfig(
        real_path=args.real,
        syn_path=args.syn,
        schema_path=args.schema,
        rules_path=args.rules,
        repeats=args.repeats,
        subsample_fraction=args.subsample,
        base_seed=args.seed,
        gmm=GmmConfig(
            n_components=args.gmm_components,
            covariance_kind=args.gmm_covariance,
            max_iters=args.gmm_max_iters,
            rel_tol=args.gmm_tol,
            cov_regularization=args.gmm_reg,
            init=args.gmm_init,
            seed=args.seed,
        ),
        metrics=tuple(args.metrics),
        dsi_columns=tuple(args.dsi_columns) if args.dsi_columns else None,
        dsi_categorical=tuple(args.dsi_categorical),
        gmm_dump_path=args.dump_gmm,
    )
    report = run_eval(config)
    text = emit_report(report, args.format, include_timing=not args.no_timing)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for name, msg in sorted(report.failures.items()):
        print(f"tabcheck: metric {name} failed: {msg}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_METRIC_FAILED


def _add_validate(sub):
    p = sub.add_parser("validate-rules", help="parse and type-check a rule file")
    p.add_argument("--schema", required=True, type=Path)
    p.add_argument("--rules", required=True, type=Path)
    p.set_defaults(func=cmd_validate)


def cmd_validate(args) -> int:
    schema = load_schema(args.schema)
    groups, rules = parse_rules(args.rules, schema)
    for g in groups:
        print(f"group {g.name}: {', '.join(g.columns)}")
    for r in rules:
        print(f"rule {r.name}: {r.source}  (tolerance {r.tolerance:g})")
    print(f"ok: {len(groups)} groups, {len(rules)} rules")
    return EXIT_OK


_PERTURB_KINDS = ("corrupt-group", "break-rule", "swap-dates", "shuffle-column", "gaussian-noise")


def _add_perturb(sub):
    p = sub.add_parser("perturb", help="apply a seeded perturbation to a table")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--schema", required=True, type=Path)
    p.add_argument("--rules", type=Path, help="needed for group and rule targets")
    p.add_argument("--kind", required=True, choices=_PERTURB_KINDS)
    p.add_argument("--target", required=True, help="group, rule, or comma-separated column names")
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0, help="noise scale in column standard deviations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_perturb)


def cmd_perturb(args) -> int:
    schema = load_schema(args.schema)
    table = load_table(args.input, schema)
    kind = args.kind
    if kind in ("corrupt-group", "break-rule", "swap-dates"):
        if args.rules is None:
            raise TabcheckError(f"--rules is required for {kind}")
        ruleset = parse_rules(args.rules, schema)
        try:
            if kind == "corrupt-group":
                p = CorruptGroup(ruleset.group(args.target), args.fraction, args.seed)
            elif kind == "break-rule":
                p = BreakRule(ruleset.rule(args.target), args.fraction, args.seed)
            else:
                p = SwapDates(ruleset.rule(args.target), args.fraction, args.seed)
        except KeyError:
            raise TabcheckError(f"rule file has no {kind.split('-')[1]} named {args.target!r}") from None
    elif kind == "shuffle-column":
        p = ShuffleColumn(args.target, args.seed)
    else:
        p = GaussianNoise(tuple(_csv_list(args.target)), args.sigma, args.seed)
    write_table(perturb(table, p), args.out)
    return EXIT_OK


def _add_smote(sub):
    p = sub.add_parser("smote", help="generate rows by nearest-neighbour interpolation")
    p.add_argument("--real", required=True, type=Path)
    p.add_argument("--schema", required=True, type=Path)
    p.add_argument("--n", required=True, type=int, dest="n_samples")
    p.add_argument("--k", type=int, default=5, dest="k_neighbors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_smote)


def cmd_smote(args) -> int:
    schema = load_schema(args.schema)
    real = load_table(args.real, schema)
    write_table(smote_like(real, args.n_samples, args.k_neighbors, args.seed), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabcheck",
        description="Check how well synthetic tables keep the logical relationships of real ones.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_eval(sub)
    _add_validate(sub)
    _add_perturb(sub)
    _add_smote(sub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (TabcheckError, FileNotFoundError, ValueError) as exc:
        print(f"tabcheck: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
