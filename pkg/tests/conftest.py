import sys
from pathlib import Path

# make oracle helpers importable from test modules
sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines where output capture cannot hide them."""
    for name in ("test_acceptance", "tests.test_acceptance"):
        module = sys.modules.get(name)
        if module is not None and getattr(module, "VERDICTS", None):
            terminalreporter.section("acceptance criteria")
            for line in module.VERDICTS:
                terminalreporter.write_line(line)
            break
