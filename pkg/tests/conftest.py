import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance")
    for name in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[name])
