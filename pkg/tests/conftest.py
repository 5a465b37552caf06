import pytest

from rootclt.orthopoly import make_family

FAMILY_SPECS = [
    ("chebyshev1", {}),
    ("legendre", {}),
    ("jacobi", {"alpha": 0.5, "beta": -0.3}),
    ("gegenbauer", {"lam": 1.5}),
]

_criteria = []


@pytest.fixture(params=FAMILY_SPECS, ids=[f[0] for f in FAMILY_SPECS])
def family(request):
    kind, params = request.param
    return make_family(kind, **params)


@pytest.fixture(scope="session")
def cheb():
    return make_family("chebyshev1")


@pytest.fixture(scope="session")
def leg():
    return make_family("legendre")


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(k, passed, detail)``."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _criteria.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criteria):
        terminalreporter.write_line(line)
