from pathlib import Path

import numpy as np
import pytest

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "eclab" / "data" / "fixture"

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _acceptance.setdefault(number, {"title": title, "status": "PASS", "detail": ""})
    if report.skipped and entry["status"] == "PASS":
        entry["status"] = "SKIP"
        entry["detail"] = str(report.longrepr[-1]) if isinstance(report.longrepr, tuple) else ""
    elif report.failed:
        entry["status"] = "FAIL"
        entry["detail"] = report.longreprtext.strip().splitlines()[-1] if report.longreprtext else ""


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        e = _acceptance[number]
        line = f"criterion {number}: {e['status']:4s}  {e['title']}"
        if e["status"] != "PASS" and e["detail"]:
            line += f"  ({e['detail']})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR
