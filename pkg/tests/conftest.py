from pathlib import Path

import pytest

from hiernav.world import load_scenario

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
FIXTURE_3R = FIXTURES / "fixture3r.json"

CRITERIA = {
    1: "graph search matches brute-force simple paths",
    2: "goal resolution lands in the right extent",
    3: "clean navigation SR/SPL and wall time",
    4: "no-global SPL falls with hop distance",
    5: "no-local SR falls with obstacle count",
    6: "global replans are always triggered",
    7: "SPL hand fixtures",
    8: "bench reports are byte-identical",
    9: "local plans keep clear of obstacles",
}

_results: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return FIXTURE_3R


@pytest.fixture
def fx3r():
    return load_scenario(FIXTURE_3R)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    crit = marker.args[0]
    detail = next((v for k, v in item.user_properties if k == "detail"), "")
    if call.when == "call":
        outcome = "PASS" if call.excinfo is None else "FAIL"
        _results[crit] = (outcome, detail)
    elif call.when == "setup" and call.excinfo is not None:
        _results[crit] = ("ERROR", str(call.excinfo.value)[:120])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(CRITERIA):
        outcome, detail = _results.get(crit, ("NOT RUN", ""))
        line = f"[{outcome}] criterion {crit}: {CRITERIA[crit]}"
        if detail:
            line += f" -- {detail}"
        tr.write_line(line)
