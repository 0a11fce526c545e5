import pytest

ACCEPTANCE: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    key = marker.args[0]
    prev = ACCEPTANCE.get(key, "PASS")
    ACCEPTANCE[key] = "PASS" if rep.passed and prev == "PASS" else "FAIL"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion this test covers")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(f"{ACCEPTANCE[key]}  criterion {key}")
