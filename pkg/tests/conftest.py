import pytest

from comptree.basis import from_spec
from comptree.tree import PLUS, TIMES, Leaf, Model, Op

# ids: 1 sin(pi x), 2 cos(pi x), 3 x, 4 x^2, 5 x^3
SMALL_SPEC = "fourier:1,poly:3"


@pytest.fixture
def small_basis():
    return from_spec(SMALL_SPEC)


def worked_example_model(basis):
    """(.1 x2^2 - .05 x1) * (.3 sin(pi x2) + .02 x3)."""
    left = Op(PLUS, Leaf(0.1, 4, 2), Leaf(-0.05, 3, 1))
    right = Op(PLUS, Leaf(0.3, 1, 2), Leaf(0.02, 3, 3))
    return Model(0.0, Op(TIMES, left, right), p=3, basis=basis)


def two_by_two_model(w, w0=0.0, basis=None):
    """(w1 phi1(x2) + w2 phi3(x1)) * (w3 phi3(x2) + w4 phi1(x3))."""
    w1, w2, w3, w4 = w
    root = Op(TIMES, Op(PLUS, Leaf(w1, 1, 2), Leaf(w2, 3, 1)), Op(PLUS, Leaf(w3, 3, 2), Leaf(w4, 1, 3)))
    return Model(w0, root, p=3, basis=basis)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
