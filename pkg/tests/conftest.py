import numpy as np
import pytest

from mmlab.ncpoly import NCPolynomial


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def X(i: int, nvars: int = 2) -> NCPolynomial:
    return NCPolynomial.var(i, nvars)


def random_poly(rng: np.random.Generator, nvars: int, degree: int, nterms: int = 5) -> NCPolynomial:
    terms = {}
    for _ in range(nterms):
        d = int(rng.integers(0, degree + 1))
        w = tuple(int(i) for i in rng.integers(1, nvars + 1, size=d))
        terms[w] = complex(rng.normal(), rng.normal())
    return NCPolynomial(terms, nvars)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[1].split()[0])):
            terminalreporter.write_line(line)
