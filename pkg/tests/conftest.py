import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from econplex.fixtures import synthetic_trade_table  # noqa: E402


@pytest.fixture(scope="session")
def panel_files(tmp_path_factory):
    """Synthetic 130 x 22 x 16 trade panel written to disk once per session."""
    d = tmp_path_factory.mktemp("panel")
    table, kinds = synthetic_trade_table()
    (d / "trade.csv").write_text(table.to_csv())
    (d / "kinds.csv").write_text("product,kind\n" + "".join(f"{p},{k}\n" for p, k in kinds.items()))
    return d


_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::test_criterion_", 1)[1]
    if report.when == "call" or report.failed:
        if report.failed or _ACCEPTANCE.get(name) != "FAIL":
            _ACCEPTANCE[name] = "FAIL" if report.failed else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        num, _, label = name.partition("_")
        terminalreporter.write_line(f"criterion {int(num):2d} {label}: {_ACCEPTANCE[name]}")
