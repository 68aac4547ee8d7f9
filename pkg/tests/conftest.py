import pytest

from ftcarbon.registry import load_registry, lookup_facility, lookup_profile

_acceptance: dict[str, bool] = {}


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture(scope="session")
def rig(registry):
    return lookup_profile(registry, "paper-rig")


@pytest.fixture(scope="session")
def iowa(registry):
    return lookup_facility(registry, "paper-iowa")


@pytest.fixture(scope="session")
def global_avg(registry):
    return lookup_facility(registry, "global-average")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for name in getattr(report, "acceptance_markers", ()):
        _acceptance[name] = _acceptance.get(name, True) and report.outcome == "passed"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    rep.acceptance_markers = [m.args[0]] if m else []


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: int(n.split()[0][2:])):
        status = "PASS" if _acceptance[name] else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}")
