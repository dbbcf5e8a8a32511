import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import appendix
from orders_fixture import GEO_COLUMNS, ORDER_GEO
from tabcheck.consistency import hcs, infer_valid_tuples, reference_tuples
from tabcheck.data import Column, Kind, Schema, Table
from tabcheck.errors import (
    EmptyReferenceError,
    EmptyTableError,
    NonCategoricalColumnError,
    SchemaMismatchError,
)
from tabcheck.rulespec import ConsistencyGroup

AB = Schema((Column("a", Kind.CATEGORICAL), Column("b", Kind.CATEGORICAL), Column("n", Kind.INTEGER)))
G_AB = ConsistencyGroup("ab", ("a", "b"))


def ab_table(pairs):
    return Table.from_rows(AB, [(x, y, 0) for x, y in pairs])


def brute_hcs(syn_rows, groups_cols, allowed_sets):
    """Count indicators one by one."""
    total = 0
    for cols, allowed in zip(groups_cols, allowed_sets):
        for row in syn_rows:
            t = tuple(row[i] for i in cols)
            total += int(None not in t and t in allowed)
    return 100.0 * total / (len(syn_rows) * len(groups_cols))


def test_single_row_reference():
    schema = appendix.GEO_SCHEMA
    real = Table.from_rows(schema, [ORDER_GEO[0]])
    vs = infer_valid_tuples(real, ConsistencyGroup("geo", tuple(GEO_COLUMNS)))
    assert vs.tuples == {("Providence", "Rhode Island", "United States", "East of USA", "USCA")}


@pytest.mark.parametrize(
    "pairs, expected",
    [
        ([("A", "X"), ("A", "X")], {("A", "X")}),
        ([("A", "X"), ("B", "Y"), ("A", "X")], {("A", "X"), ("B", "Y")}),
        ([("A", None), ("B", "Y")], {("B", "Y")}),
    ],
)
def test_infer_deduplicates(pairs, expected):
    assert infer_valid_tuples(ab_table(pairs), G_AB).tuples == expected


def test_infer_errors():
    with pytest.raises(EmptyReferenceError):
        infer_valid_tuples(ab_table([("A", None)]), G_AB)
    with pytest.raises(NonCategoricalColumnError):
        infer_valid_tuples(ab_table([("A", "X")]), ConsistencyGroup("an", ("a", "n")))


def test_self_evaluation_is_exactly_100(orders, ruleset):
    valid = [infer_valid_tuples(orders, g) for g in ruleset.groups]
    assert hcs(orders, ruleset.groups, valid).overall == 100.0


def test_ten_rows_three_corrupted_in_one_of_two_groups():
    schema = Schema(tuple(Column(c, Kind.CATEGORICAL) for c in "abcd"))
    rows = [("a", "b", "c", "d")] * 10
    g1, g2 = ConsistencyGroup("g1", ("a", "b")), ConsistencyGroup("g2", ("c", "d"))
    real = Table.from_rows(schema, rows)
    valid = [infer_valid_tuples(real, g) for g in (g1, g2)]
    syn = Table.from_rows(schema, [("zz", "b", "c", "d")] * 3 + rows[3:])
    res = hcs(syn, [g1, g2], valid)
    assert res.overall == 85.0
    assert res.per_group["g1"].valid_count == 7
    assert res.per_group["g2"].score == 100.0
    assert [v.row for v in res.violations] == [0, 1, 2]


def test_unseen_city_name_is_a_violation():
    keys, table = appendix.geo()
    group = ConsistencyGroup("geo", tuple(GEO_COLUMNS))
    real = table.take([i for i, k in enumerate(keys) if k[0] == "Original"])
    valid = infer_valid_tuples(real, group)
    row = keys.index(("GReaT", 10, False))
    assert table.row(row)[2] == "13551"
    assert table.take([row]).column("order_city")[0] not in {t[0] for t in valid.tuples}
    assert hcs(table.take([row]), [group], [valid]).overall == 0.0


def test_whitespace_is_trimmed_but_case_matters():
    real = ab_table([("A", "X")])
    syn = ab_table([(" A", "X "), ("a", "X")])
    res = hcs(syn, [G_AB], [infer_valid_tuples(real, G_AB)])
    assert res.per_group["ab"].valid_count == 1


def test_null_tuples_score_zero():
    real = ab_table([("A", "X")])
    syn = ab_table([("A", None), ("A", "X")])
    assert hcs(syn, [G_AB], [infer_valid_tuples(real, G_AB)]).overall == 50.0


def test_schema_mismatch_and_empty():
    other = Schema((Column("a", Kind.CATEGORICAL), Column("c", Kind.CATEGORICAL)))
    valid = [infer_valid_tuples(ab_table([("A", "X")]), G_AB)]
    with pytest.raises(SchemaMismatchError):
        hcs(Table.from_rows(other, [("A", "X")]), [G_AB], valid)
    with pytest.raises(EmptyTableError):
        hcs(ab_table([]), [G_AB], valid)


def test_violation_sample_is_capped():
    syn = ab_table([("Q", "Q")] * 30)
    res = hcs(syn, [G_AB], [infer_valid_tuples(ab_table([("A", "X")]), G_AB)], sample_cap=5)
    assert len(res.violations) == 5
    assert res.per_group["ab"].valid_count == 0


def test_explicit_tuple_file_overrides_real(tmp_path):
    (tmp_path / "t.csv").write_text("a,b\nA,Y\n")
    g = ConsistencyGroup("ab", ("a", "b"), tmp_path / "t.csv")
    vs = reference_tuples(ab_table([("A", "X")]), g)
    assert vs.tuples == {("A", "Y")}


# --- properties -------------------------------------------------------------

symbols = st.sampled_from(["A", "B", "C", None])
pair_lists = st.lists(st.tuples(symbols, symbols), min_size=1, max_size=40)


@settings(max_examples=200)
@given(pair_lists, pair_lists, st.randoms(use_true_random=False))
def test_matches_brute_force_and_is_permutation_invariant(real_pairs, syn_pairs, rnd):
    real = ab_table(real_pairs + [("A", "B")])
    syn = ab_table(syn_pairs)
    valid = infer_valid_tuples(real, G_AB)
    expected = brute_hcs(list(syn.rows()), [(0, 1)], [valid.tuples])
    got = hcs(syn, [G_AB], [valid]).overall
    assert got == pytest.approx(expected, abs=1e-12)
    assert 0.0 <= got <= 100.0
    shuffled = list(syn_pairs)
    rnd.shuffle(shuffled)
    assert hcs(ab_table(shuffled), [G_AB], [valid]).overall == got


@settings(max_examples=100)
@given(st.integers(1, 50), st.integers(0, 49))
def test_one_bad_tuple_costs_exactly_one_indicator(m, j):
    j %= m
    real = ab_table([("A", "X")])
    valid = [infer_valid_tuples(real, G_AB)]
    rows = [("A", "X")] * m
    before = hcs(ab_table(rows), [G_AB], valid).overall
    rows[j] = ("unseen", "X")
    after = hcs(ab_table(rows), [G_AB], valid).overall
    assert before - after == pytest.approx(100.0 / m, abs=1e-12)


def test_idempotent_reference_on_random_tables():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pairs = [(str(a), str(b)) for a, b in rng.integers(0, 4, size=(25, 2))]
        t = ab_table(pairs)
        assert hcs(t, [G_AB], [infer_valid_tuples(t, G_AB)]).overall == 100.0
