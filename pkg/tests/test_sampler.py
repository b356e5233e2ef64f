import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from mmlab import sampler
from mmlab.matnum import random_hermitian
from mmlab.ncpoly import NCPolynomial

from conftest import X, random_poly


def one(nvars=1):
    return NCPolynomial.constant(1.0, nvars)


def zero(nvars=1):
    return NCPolynomial.zero(nvars)


def gaussian_spec(n, nvars=1):
    x = X(1, nvars)
    return sampler.ModelSpec(nvars, n, zero(nvars), 0.5 * x * x, 0.0)


def test_energy_examples():
    x = X(1, 1)
    spec = sampler.ModelSpec(1, 2, zero(), x * x, 0.0)
    assert sampler.energy(spec, [np.diag([1.0, 2.0])]) == pytest.approx(10.0)
    a, b = X(1), X(2)
    C = a * b - b * a
    comm = sampler.ModelSpec(2, 3, -1.0 * C * C, zero(2), 1.0)
    assert sampler.energy(comm, [np.diag([1.0, 2.0, 3.0]), np.diag([0.5, -1.0, 4.0])]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        sampler.energy(spec, [np.eye(3)])


def test_energy_monomial_oracle(rng):
    P = random_poly(rng, 2, 4, 6)
    V = 0.5 * (P + P.star())
    spec = sampler.ModelSpec(2, 4, zero(2), V, 0.0)
    mats = [random_hermitian(rng, 4), random_hermitian(rng, 4)]
    total = 0j
    for w, c in V:
        M = np.eye(4, dtype=complex)
        for letter in w:
            M = M @ mats[letter - 1]
        total += c * np.trace(M)
    assert sampler.energy(spec, mats) == pytest.approx(4 * total.real, rel=1e-12)


def _basis(n):
    for k in range(n):
        E = np.zeros((n, n), complex)
        E[k, k] = 1
        yield E
    for k in range(n):
        for l in range(k + 1, n):
            E = np.zeros((n, n), complex)
            E[k, l] = E[l, k] = 1
            yield E
            F = np.zeros((n, n), complex)
            F[k, l], F[l, k] = 1j, -1j
            yield F


def test_grad_matches_finite_differences(rng):
    for trial in range(4):
        n = int(rng.integers(2, 7))
        P = random_poly(rng, 2, 4, 6)
        spec = sampler.ModelSpec(2, n, zero(2), 0.5 * (P + P.star()), 0.0)
        mats = [random_hermitian(rng, n), random_hermitian(rng, n)]
        G = sampler.grad_energy(spec, mats)
        for i in range(2):
            assert np.allclose(G[i], G[i].conj().T)
            for E in _basis(n):
                h = 1e-5
                up = [m + h * E if j == i else m for j, m in enumerate(mats)]
                dn = [m - h * E if j == i else m for j, m in enumerate(mats)]
                fd = (sampler.energy(spec, up) - sampler.energy(spec, dn)) / (2 * h)
                an = np.real(np.trace(G[i] @ E))
                assert an == pytest.approx(fd, rel=1e-5, abs=1e-6 * max(1.0, abs(fd)))


def test_grad_examples(rng):
    n = 3
    M = random_hermitian(rng, n)
    assert np.allclose(sampler.grad_energy(gaussian_spec(n), [M])[0], n * M)
    lin = sampler.ModelSpec(1, n, zero(), X(1, 1), 0.0)
    assert np.allclose(sampler.grad_energy(lin, [M])[0], n * np.eye(n))
    a, b = X(1), X(2)
    C = a * b - b * a
    spec = sampler.ModelSpec(2, n, -1.0 * C * C, zero(2), 1.0)
    A, B = random_hermitian(rng, n), random_hermitian(rng, n)
    want = n * (2 * A @ B @ B + 2 * B @ B @ A - 4 * B @ A @ B)
    assert np.allclose(sampler.grad_energy(spec, [A, B])[0], want)


def test_spec_validation():
    with pytest.raises(ValueError):
        sampler.ModelSpec(1, 2, zero(), NCPolynomial({(1,): 1j}, 1), 0.0)
    with pytest.raises(ValueError):
        sampler.ModelSpec(1, 2, zero(), X(1, 1), -1.0)
    with pytest.raises(ValueError):
        sampler.ChainConfig(proposal="slice")
    with pytest.raises(ValueError):
        sampler.ChainConfig(step=0.0)
    with pytest.raises(ValueError):
        sampler._Block(gaussian_spec(2), sampler.ChainConfig(proposal="gibbs"), 2, np.random.SeedSequence(0))


@pytest.mark.parametrize("proposal", ["metropolis-gaussian", "mala", "hmc"])
def test_gaussian_second_and_fourth_moment(proposal):
    n = 16
    s = sampler.sample(gaussian_spec(n), sampler.ChainConfig(proposal=proposal, burn_in=300, thin=3,
                                                               samples=300, chains=32, seed=7,
                                                               moment_degree=4))
    x = X(1, 1)
    m2 = s.moment(x * x)
    assert m2.within(3.0, 1.0)
    m4 = s.moment(x * x * x * x)
    assert m4.within(3.0, 2.0 + 1.0 / n**2)
    assert s.moment(x).within(3.0, 0.0)


def test_ds_residuals_quartic():
    x = X(1, 1)
    spec = sampler.ModelSpec(1, 8, zero(), 0.5 * x * x + 0.1 * x**4, 0.0)
    s = sampler.sample(spec, sampler.ChainConfig(burn_in=300, thin=3, samples=400, chains=32, seed=8,
                                                 moment_degree=6))
    for P in (one(), x, x * x):
        r = sampler.ds_residual(s, P, 1)
        assert r.within(3.0)
    with pytest.raises(ValueError):
        sampler.ds_residual(s, x**4, 1)


def test_determinism():
    cfg = sampler.ChainConfig(burn_in=20, thin=2, samples=10, chains=40, seed=1, threads=1)
    a = sampler.sample(gaussian_spec(4), cfg)
    b = sampler.sample(gaussian_spec(4), sampler.ChainConfig(**{**cfg.to_json(), "threads": 3}))
    assert np.array_equal(a.traces, b.traces)
    s1 = [snap[0] for snap, _ in sampler.run_chain(gaussian_spec(4), cfg)]
    s2 = [snap[0] for snap, _ in sampler.run_chain(gaussian_spec(4), cfg)]
    assert all(np.array_equal(u, v) for u, v in zip(s1, s2))


@pytest.mark.parametrize("proposal", ["metropolis-gaussian", "mala", "hmc"])
def test_detailed_balance_scalar_toy(proposal):
    # a 1x1 "matrix" with V = x^4/4 - x^2/2 + 0.3 x: compare with quadrature
    x = X(1, 1)
    V = 0.25 * x**4 - 0.5 * x * x + 0.3 * x
    spec = sampler.ModelSpec(1, 1, zero(), V, 0.0)
    s = sampler.sample(spec, sampler.ChainConfig(proposal=proposal, step=1.0, burn_in=500, thin=2,
                                                 samples=2000, chains=32, seed=6, moment_degree=2))
    f = lambda t: math.exp(-(0.25 * t**4 - 0.5 * t * t + 0.3 * t))  # noqa: E731
    Z = integrate.quad(f, -10, 10)[0]
    for k in (1, 2):
        exact = integrate.quad(lambda t: t**k * f(t), -10, 10)[0] / Z
        assert s.moment(x**k).within(4.0, exact)


def test_reflection_matches_two_by_two_quadrature():
    x = X(1, 1)
    U = (x * x - 1.0) ** 2
    W = 0.2 * x
    beta = 3.0
    spec = sampler.ModelSpec(1, 2, U, W, beta)
    s = sampler.sample(spec, sampler.ChainConfig(burn_in=500, thin=4, samples=1500, chains=32, seed=2,
                                                 moment_degree=2, reflect_prob=0.5))
    V = lambda t: beta * (t * t - 1) ** 2 + 0.2 * t  # noqa: E731
    dens = lambda a, b: (a - b) ** 2 * math.exp(-2 * (V(a) + V(b)))  # noqa: E731
    Z = integrate.dblquad(dens, -3, 3, -3, 3)[0]
    m1 = integrate.dblquad(lambda a, b: 0.5 * (a + b) * dens(a, b), -3, 3, -3, 3)[0] / Z
    assert s.moment(x).within(4.0, m1)
    assert s.reflect_acceptance is not None and s.reflect_acceptance > 0.01


def test_convex_concentration():
    a, b = X(1), X(2)
    alpha = (0.7, -1.2)
    U = (a - alpha[0]) * (a - alpha[0]) + (b - alpha[1]) * (b - alpha[1])
    for beta in (1e2, 1e4):
        spec = sampler.ModelSpec(2, 6, U, zero(2), beta)
        s = sampler.sample(spec, sampler.ChainConfig(burn_in=200, thin=2, samples=100, chains=16, seed=3,
                                                     moment_degree=2))
        for i, al in enumerate(alpha, start=1):
            assert abs(s.moment(X(i)).real - al) <= 5 / math.sqrt(beta)


def test_criticality_gaussian_decay():
    x = X(1, 1)
    vals = []
    for beta in (10.0, 100.0):
        spec = sampler.ModelSpec(1, 8, x * x, zero(), beta)
        s = sampler.sample(spec, sampler.ChainConfig(burn_in=200, thin=2, samples=200, chains=32, seed=1,
                                                     moment_degree=2))
        rep = sampler.criticality_moments(s, 1, 1, L=32.0)
        # tau(|2X|^2) = 4 tau(X^2) = 4 / (2 beta) exactly
        assert rep.estimate.within(4.0, 2.0 / beta)
        assert rep.passed
        vals.append(rep.estimate.real)
    assert vals[1] < vals[0] / 5
    with pytest.raises(ValueError):
        sampler.criticality_moments(s, 1, 0, L=32.0)


def test_criticality_bound_formula():
    x = X(1, 1)
    # D U = 2X, D W = X, d(2X) = 2 (1 (x) 1): B = 4 (2 L^2 + 4)
    assert sampler.criticality_bound(x * x, 0.5 * x * x, 2.0) == pytest.approx(4 * (2 * 4 + 4))
    assert sampler.coefficient_norm(3.0 * x * x - x, 2.0) == pytest.approx(14.0)


def test_concentration_quadratic():
    x = X(1, 1)
    beta = 50.0
    spec = sampler.ModelSpec(1, 16, x * x, zero(), beta)
    s = sampler.sample(spec, sampler.ChainConfig(burn_in=200, thin=2, samples=313, chains=32, seed=2,
                                                 moment_degree=2))
    assert len(s) >= 10_000
    rep = sampler.concentration_diagnostics(s, eta=1.0, A=0.0, d=1)
    assert rep.L == 32.0
    assert rep.m == pytest.approx(0.0, abs=1e-8)
    assert rep.norm_frequency == 0.0 and rep.trace_frequency == 0.0
    # tau(U) averages 1/(2 beta), well inside O(ln beta / beta)
    assert rep.mean_trace_U.real <= math.log(beta) / beta


def test_commutator_quadratic_form():
    a, b = X(1), X(2)
    C = a * b - b * a
    assert sampler.commutator_quadratic_form((-2.0 * C * C + a * a + 3.0 * b * b).cyclic_symmetrized()) == \
        pytest.approx((2.0, 1.0, 3.0))
    assert sampler.commutator_quadratic_form(a * a + b * b * b * b) is None


def test_acceptance_warning():
    cfg = sampler.ChainConfig(proposal="metropolis-gaussian", step=50.0, adapt=False, burn_in=0, thin=1,
                              samples=20, chains=4, seed=0, moment_degree=2)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        sampler.sample(gaussian_spec(8), cfg)
    assert any("acceptance" in str(m.message) for m in w)


def test_estimate_batches():
    vals = np.arange(100.0)
    est = sampler.estimate(vals, np.zeros(100, int))
    assert est.value == pytest.approx(49.5)
    assert est.stderr > 0
