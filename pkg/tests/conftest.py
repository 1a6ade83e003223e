import numpy as np
import pytest

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when not in ("setup", "call"):
        return
    num, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.when == "call" or rep.failed:
        _ACCEPTANCE[num] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[num]
        line = f"criterion {num:2d} {verdict}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
