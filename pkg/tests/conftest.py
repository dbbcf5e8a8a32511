import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from orders_fixture import RULES_TEXT, make_orders, orders_schema  # noqa: E402

from tabcheck.rulespec import parse_rules_text  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def schema():
    return orders_schema()


@pytest.fixture
def orders():
    return make_orders(200, seed=7)


@pytest.fixture
def ruleset(schema):
    return parse_rules_text(RULES_TEXT, schema)


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def workspace(tmp_path, schema, orders, ruleset):
    """Files for an end-to-end run: real = orders, syn = orders with 25% of order_geo corrupted."""
    from tabcheck.data import write_table
    from tabcheck.harness import CorruptGroup, perturb

    (tmp_path / "schema.txt").write_text(schema.to_text(), encoding="utf-8")
    (tmp_path / "rules.ini").write_text(RULES_TEXT, encoding="utf-8")
    write_table(orders, tmp_path / "real.csv")
    syn = perturb(orders, CorruptGroup(ruleset.group("order_geo"), 0.25, seed=1))
    write_table(syn, tmp_path / "syn.csv")
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
