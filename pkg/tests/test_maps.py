import math
from fractions import Fraction

import numpy as np
import pytest

from mmlab import maps, sampler
from mmlab.ncpoly import NCPolynomial

from conftest import X


def test_enumerate_examples():
    assert maps.enumerate_planar((1, 1)) == 1
    assert maps.enumerate_planar((1, 1, 1, 1)) == 2
    assert maps.enumerate_planar((1, 1), [(1, maps.StarType((1, 1)))]) == 2
    # odd half-edge count per color: no matching at all
    assert maps.enumerate_planar((1, 2)) == 0


@pytest.mark.parametrize("k", range(1, 7))
def test_catalan(k):
    assert maps.enumerate_planar((1,) * (2 * k)) == maps.catalan(k)


def test_budget():
    with pytest.raises(ValueError):
        maps.enumerate_planar((1,) * 16)
    with pytest.raises(ValueError):
        maps.StarType(())


def test_matching_counts_and_genus():
    colors = [1, 1, 2, 2, 1, 1, 2, 2]
    matchings = list(maps.iter_matchings(colors))
    assert len(matchings) == maps.count_matchings(colors) == 9
    stars = [maps.StarType((1, 1, 2, 2)), maps.StarType((1, 1, 2, 2))]
    for a in matchings:
        m = maps.build_map(stars, a)
        if m.connected:
            assert m.genus >= 0
    assert maps.count_matchings([1] * 8) == 105


def test_map_validation():
    with pytest.raises(ValueError):
        maps.build_map([maps.StarType((1, 2))], [1, 0])
    with pytest.raises(ValueError):
        maps.build_map([maps.StarType((1, 1))], [0, 1])


def test_rewrite_examples():
    x, y = X(1), X(2)
    m = maps.rewrite_potential(0.5 * x * x + 0.5 * y * y)
    assert np.allclose(m.alpha, 0) and np.allclose(m.hessian, np.eye(2))
    assert m.couplings == []
    x1 = X(1, 1)
    m = maps.rewrite_potential(0.5 * (x1 - 1.0) * (x1 - 1.0))
    assert m.alpha == pytest.approx([1.0])
    m = maps.rewrite_potential(0.5 * x1 * x1 + 0.25 * x1**4)
    assert m.alpha == pytest.approx([0.0]) and np.allclose(m.hessian, [[1.0]])
    assert len(m.couplings) == 1
    c = m.couplings[0]
    assert c.n == 2 and c.word == (1, 1, 1, 1) and c.coeff == pytest.approx(0.25)


def test_rewrite_errors():
    x1 = X(1, 1)
    with pytest.raises(ValueError):
        maps.rewrite_potential((x1 * x1 - 1.0) ** 2)
    with pytest.raises(ValueError):
        maps.rewrite_potential(x1**4)


def test_gaussian_series_and_calibration():
    m = maps.rewrite_potential(0.5 * X(1, 1) * X(1, 1))
    assert m.edge_weight == 1
    assert maps.moment_series(m, (1, 1), 0) == {0: 1}
    assert maps.moment_series(m, (1, 1, 1, 1), 0) == {0: 2}
    # with the quadratic part normalized to sum Y^2 the propagator is 1/2
    half = maps.moment_series(m, (1, 1, 1, 1), 0, edge_weight=Fraction(1, 2))
    assert half == {0: Fraction(1, 2)}


def _bipz_m2(g):
    # planar <x^2> for V = x^2/2 + g x^4: 12 g a^4 + a^2 - 1 = 0, m2 = a^2 (4 - a^2) / 3
    if g == 0:
        return 1.0
    a2 = 2 / (1 + math.sqrt(1 + 48 * g))
    return a2 * (4 - a2) / 3


def test_quartic_series_matches_planar_solution():
    x1 = X(1, 1)
    m = maps.rewrite_potential(0.5 * x1 * x1 + 0.25 * x1**4)
    s = maps.moment_series(m, (1, 1), 4)
    assert s == {0: 1, 1: 0, 2: -2, 3: 0, 4: 9}
    # Taylor coefficients of the exact planar answer at g = 1/(4 beta)
    f = lambda eps: _bipz_m2(eps / 4)  # noqa: E731
    h = 1e-3
    assert (f(h) - f(-h)) / (2 * h) == pytest.approx(-2, rel=1e-4)
    assert (f(h) - 2 * f(0.0) + f(-h)) / (2 * h * h) == pytest.approx(9, rel=1e-3)


def test_series_budget():
    x1 = X(1, 1)
    m = maps.rewrite_potential(0.5 * x1 * x1 + 0.25 * x1**4)
    with pytest.raises(ValueError):
        maps.moment_series(m, (1, 1), 8)


def test_series_against_sampler():
    # U = x^2/2 + x^4/4, W = x: tau(Y) = -beta^(-1/2) + O(beta^(-3/2))
    x1 = X(1, 1)
    U, W = 0.5 * x1 * x1 + 0.25 * x1**4, x1
    m = maps.rewrite_potential(U, W)
    series = maps.moment_series(m, (1,), 3)
    assert series[0] == 0 and series[1] == -1
    beta = 100.0
    s = sampler.sample(sampler.ModelSpec(1, 8, U, W, beta),
                       sampler.ChainConfig(burn_in=300, thin=3, samples=300, chains=32, seed=4, moment_degree=2))
    est = s.moment(x1)
    scaled = math.sqrt(beta) * est.real
    pred = sum(float(c) * beta ** (-k / 2) for k, c in series.items())
    tail = 10 * beta ** (-2)
    assert abs(scaled - pred) <= 3 * math.sqrt(beta) * est.stderr + tail
    # order 0: the Gaussian second moment of Y
    m2 = s.moment(x1 * x1).real * beta
    assert m2 == pytest.approx(float(maps.moment_series(m, (1, 1), 0)[0]), abs=0.1)
