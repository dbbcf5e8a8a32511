import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import appendix
from orders_fixture import DT_FORMAT
from tabcheck.data import Column, Kind, Schema, Table, parse_datetime
from tabcheck.dependency import mdi, rule_verdicts
from tabcheck.errors import SchemaMismatchError
from tabcheck.expr import eval_expr, parse_expr
from tabcheck.rulespec import DependencyRule, parse_rules_text

XY = Schema((Column("x", Kind.REAL), Column("y", Kind.REAL)))
POSITIVE = DependencyRule("pos", parse_expr("x > 0"))
ORDERED = DependencyRule("ord", parse_expr("x < y"))


def xy(rows):
    return Table.from_rows(XY, rows)


def brute_mdi(table, rules):
    hits = 0
    for r in rules:
        for row in table.rows():
            hits += eval_expr(r.expr, row, table.schema, r.tolerance) is True
    return 100.0 * hits / (table.n_rows * len(rules))


def test_four_rows_two_rules_six_of_eight():
    t = xy([(1, 2), (2, 1), (-1, 0), (3, 4)])
    res = mdi(t, [POSITIVE, ORDERED])
    assert brute_mdi(t, [POSITIVE, ORDERED]) == 75.0
    assert res.overall == 75.0
    assert res.per_rule["pos"].satisfied_count == 3
    assert res.per_rule["ord"].satisfied_count == 3


@pytest.mark.parametrize(
    "row, expected",
    [
        ((1, 50, 0.16, 8, 50, 42), (True, True, True)),
        ((1, 129.99, 0.04, 5.40, 129.99, 124.22), (True, False, False)),
    ],
)
def test_financial_rows(row, expected):
    schema = appendix.MATHS_SCHEMA
    ruleset = parse_rules_text(appendix.FINANCIAL_RULES, schema)
    t = Table.from_rows(schema, [tuple(float(v) if i else int(v) for i, v in enumerate(row))])
    got = tuple(rule_verdicts(t, r)[0] for r in ruleset.rules)
    assert got == expected


def test_late_delivery_is_false():
    schema = appendix.TEMPORAL_SCHEMA
    row = (parse_datetime("16/01/2015 22:19:11", DT_FORMAT), parse_datetime("16/01/2015 10:19:00", DT_FORMAT))
    rule = DependencyRule("t", parse_expr("order_date < shipping_date"))
    assert rule_verdicts(Table.from_rows(schema, [row]), rule) == [False]


def _golden(loader, exclude=frozenset()):
    keys, table, ruleset = loader()
    verdicts = [rule_verdicts(table, r) for r in ruleset.rules]
    out = []
    for i, (method, row, preserved) in enumerate(keys):
        if (method, row) in exclude:
            continue
        out.append(((method, row), preserved, all(v[i] is True for v in verdicts)))
    return out


@pytest.mark.parametrize("key, preserved, got", _golden(appendix.maths, appendix.INCONSISTENT_ROWS))
def test_maths_golden_rows(key, preserved, got):
    assert got == preserved


@pytest.mark.parametrize("key, preserved, got", _golden(appendix.temporal))
def test_temporal_golden_rows(key, preserved, got):
    assert got == preserved


def test_excluded_rows_really_break_an_identity():
    got = {k: g for k, _, g in _golden(appendix.maths)}
    assert not got[("TabSyn", 3)]
    assert not got[("TabSyn", 5)]


def test_undetermined_counts_as_violation():
    res = mdi(xy([(None, 1.0), (1.0, 2.0)]), [ORDERED])
    assert res.overall == 50.0
    assert res.per_rule["ord"].undetermined_count == 1
    (v,) = res.violations
    assert v.undetermined and v.values == {"x": None, "y": 1.0}


def test_violation_witnesses_every_referenced_column():
    res = mdi(xy([(2.0, 1.0)]), [ORDERED])
    assert res.violations[0].values == {"x": 2.0, "y": 1.0}


def test_missing_rule_column():
    other = Schema((Column("x", Kind.REAL),))
    with pytest.raises(SchemaMismatchError):
        mdi(Table.from_rows(other, [(1.0,)]), [ORDERED])


def test_tolerance_override():
    near = DependencyRule("near", parse_expr("x ~= y"), tolerance=0.0)
    t = xy([(1.0, 1.005)])
    assert mdi(t, [near]).overall == 0.0
    assert mdi(t, [near], tolerance=0.01).overall == 100.0


rows = st.lists(
    st.tuples(st.floats(-10, 10) | st.none(), st.floats(-10, 10) | st.none()),
    min_size=1,
    max_size=30,
)


@settings(max_examples=200)
@given(rows, st.randoms(use_true_random=False))
def test_matches_brute_force_and_permutation(data, rnd):
    t = xy(data)
    got = mdi(t, [POSITIVE, ORDERED]).overall
    assert got == pytest.approx(brute_mdi(t, [POSITIVE, ORDERED]), abs=1e-12)
    shuffled = list(data)
    rnd.shuffle(shuffled)
    assert mdi(xy(shuffled), [POSITIVE, ORDERED]).overall == got


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=30))
def test_decomposes_into_rule_means(data):
    res = mdi(xy(data), [POSITIVE, ORDERED])
    mean = sum(s.score for s in res.per_rule.values()) / 2
    assert res.overall == pytest.approx(mean, abs=1e-9)


@given(
    st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=30),
    st.floats(0, 5),
    st.floats(0, 5),
)
def test_monotone_in_tolerance(data, t1, t2):
    near = DependencyRule("near", parse_expr("x ~= y"))
    lo, hi = sorted((t1, t2))
    assert mdi(xy(data), [near], tolerance=lo).overall <= mdi(xy(data), [near], tolerance=hi).overall


@given(st.integers(1, 40), st.integers(0, 39))
def test_one_flip_costs_exactly_one_evaluation(m, j):
    j %= m
    data = [(1.0, 2.0)] * m
    before = mdi(xy(data), [POSITIVE, ORDERED]).overall
    data[j] = (3.0, 2.0)
    after = mdi(xy(data), [POSITIVE, ORDERED]).overall
    assert before - after == pytest.approx(100.0 / (2 * m), abs=1e-12)
