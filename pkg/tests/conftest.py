import pytest

from hopfren.theory import load_fixture


@pytest.fixture(scope="session")
def phi3_6():
    return load_fixture("phi3_d6")


@pytest.fixture(scope="session")
def phi3_4():
    return load_fixture("phi3_d4")


@pytest.fixture(scope="session")
def phi4_4():
    return load_fixture("phi4_d4")


@pytest.fixture(scope="session")
def ym():
    return load_fixture("toyym_1edge")


@pytest.fixture(scope="session")
def grav():
    return load_fixture("toygrav")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
