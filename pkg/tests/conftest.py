import pytest
from hypothesis import settings

from nearcol import make_context

settings.register_profile("nearcol", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("nearcol")

_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ctx_small():
    return make_context(1e-3, -1.0)


@pytest.fixture(scope="session")
def ctx_kepler():
    return make_context(0.0, -1.0)


@pytest.fixture(scope="session")
def jj_orbits():
    from nearcol.connections import find_ec_orbits
    return find_ec_orbits(make_context(1e-3, -1.0), "J-J+", n_wanted=2)
