def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion verdict lines past output capture."""
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
