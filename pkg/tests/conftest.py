import pytest

from hgi_policy.fixtures import BUILTIN


@pytest.fixture(params=["NET-A", "NET-B", "NET-C", "NET-D", "NET-E", "MM1"])
def fixture_net(request):
    return request.param, BUILTIN[request.param]()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
