import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line, then fail the test if the criterion did not hold."""
    results = request.config.stash[_RESULTS]

    def record(number: int, passed: bool | None, detail: str):
        # passed=None marks a criterion that is declared out of scope
        results.append((number, {True: "PASS", False: "FAIL", None: "N/A "}[passed], detail))
        assert passed is not False, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, [])
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number, status, detail in sorted(results, key=lambda r: r[0]):
            terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
