import math

import numpy as np
import pytest

from mmlab import trapping as T
from mmlab.matnum import random_hermitian
from mmlab.ncpoly import NCPolynomial

from conftest import X


def comm_sq(i=1, j=2, nvars=2):
    a, b = NCPolynomial.var(i, nvars), NCPolynomial.var(j, nvars)
    c = a * b - b * a
    return -(c * c)


def tuple_(rng, n, ell=2, scale=1.0):
    return [random_hermitian(rng, n, scale) for _ in range(ell)]


def test_quadratic_residual_is_zero(rng):
    V = X(1) ** 2 + X(2) ** 2
    spec = T.TrappingSpec(V, 2.0, 0.0)
    for n in (2, 5):
        assert abs(T.trapping_residual(spec, 0, tuple_(rng, n))) < 1e-10


def test_commutator_is_zero_zero_trapping(rng):
    rep = T.fuzz_trapping(T.TrappingSpec(comm_sq(), 0.0, 0.0), 1000, rng, sizes=range(2, 9), ks=range(0, 4))
    assert rep.violations == 0


def test_trace_convex_example_not_confining_but_trapping_on_samples(rng):
    V = X(1) ** 2 + X(2) ** 2 + 0.5 * (X(1) ** 2 * X(2) ** 2 + X(2) ** 2 * X(1) ** 2)
    rep = T.classify_confining(V)
    assert not rep.confining
    assert "degree 4" in rep.reason
    # the syntactic class excludes it, yet no random tuple violates (2, 0)-trapping
    fz = T.fuzz_trapping(T.TrappingSpec(V, 2.0, 0.0), 500, rng, ks=range(0, 5), scale=2.0)
    assert fz.violations == 0


def test_trapping_residual_errors(rng):
    spec = T.TrappingSpec(X(1) ** 2 + X(2) ** 2, 1.0, 0.0)
    with pytest.raises(ValueError):
        T.trapping_residual(spec, -1, tuple_(rng, 2))
    with pytest.raises(ValueError):
        T.trapping_residual(spec, 0, tuple_(rng, 2, ell=3))
    with pytest.raises(ValueError):
        T.TrappingSpec(X(1) ** 2, 1.0, 0.0, partition=((1,), (1, 2)))
    with pytest.raises(ValueError):
        T.TrappingSpec(NCPolynomial.monomial((1, 2), 2, 1j), 1.0, 0.0)


def test_trapping_additivity(rng):
    U = comm_sq() + X(1) ** 4
    W = X(1) ** 2 + 0.3 * X(2) ** 2
    beta, eta, A, eta2, A2 = 7.0, 0.5, 0.2, 1.3, -0.4
    for k in range(3):
        Xs = tuple_(rng, 4)
        lhs = T.trapping_residual(T.TrappingSpec(beta * U + W, beta * eta + eta2, beta * A + A2), k, Xs)
        rhs = beta * T.trapping_residual(T.TrappingSpec(U, eta, A), k, Xs) + \
            T.trapping_residual(T.TrappingSpec(W, eta2, A2), k, Xs)
        assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9)


def test_adding_commutator_never_decreases_residual(rng):
    V = X(1) ** 4 + X(2) ** 2
    for _ in range(50):
        k = int(rng.integers(0, 4))
        Xs = tuple_(rng, int(rng.integers(2, 7)))
        alpha = float(rng.uniform(0, 3))
        base = T.trapping_residual(T.TrappingSpec(V, 1.0, 0.5), k, Xs)
        more = T.trapping_residual(T.TrappingSpec(V + alpha * comm_sq(), 1.0, 0.5), k, Xs)
        assert more >= base - 1e-9 * max(1.0, abs(base))


def test_support_radius():
    assert T.support_radius(1.0, 0.0, 1) == 32.0
    assert T.support_radius(1.0, 0.0, 2) == 64.0
    assert T.support_radius(100.0, 0.0, 1) == 32.0
    with pytest.raises(ValueError):
        T.support_radius(0.0, 0.0, 1)


def test_classifier_examples():
    x1, x2, x3 = (NCPolynomial.var(i, 3) for i in (1, 2, 3))
    assert T.classify_confining(x1**4 + x2**4 + x1 * x2 * x2 + x3**2).confining
    assert T.classify_confining(X(1) ** 2 + X(2) ** 2).confining
    rep = T.classify_confining(comm_sq() + X(1) ** 2 + X(2) ** 2)
    assert rep.confining and rep.commutator_terms == {(1, 2): pytest.approx(1.0)}
    assert not T.classify_confining(X(1) ** 3 + X(2) ** 2).confining
    assert not T.classify_confining(X(1) ** 2).confining  # letter 2 unconstrained


def test_commutator_inequality(rng):
    n = 4
    Xm = random_hermitian(rng, n)
    val, ok = T.trace_ineq_commutator(Xm, np.zeros((n, n)), 2, 3)
    assert val == 0.0
    for _ in range(20):
        Xm, Y = random_hermitian(rng, n), random_hermitian(rng, n)
        val, ok = T.trace_ineq_commutator(Xm, Y, 1, 1)
        assert ok and val >= -1e-10
        assert val == pytest.approx(T.commutator_ineq_oracle(Xm, Y, 1, 1), rel=1e-9, abs=1e-10)


def test_commutator_inequality_precondition(rng):
    found = False
    for _ in range(200):
        Xm, Y = random_hermitian(rng, 3), random_hermitian(rng, 3)
        val, ok = T.trace_ineq_commutator(Xm, Y, 1, 2)
        if np.linalg.eigvalsh(Xm)[0] < 0:
            assert not ok
        found |= val < -1e-6
    assert found  # the inequality genuinely needs its precondition
    P = random_hermitian(rng, 3)
    _, ok = T.trace_ineq_commutator(P @ P, random_hermitian(rng, 3), 1, 2)
    assert ok


def test_holder_inequality(rng):
    for k in range(3):
        for D in range(3):
            Xs = [random_hermitian(rng, 4)]
            assert abs(T.trace_ineq_holder(Xs, k, D)) <= 1e-9 * max(1.0, np.trace(np.linalg.matrix_power(Xs[0] @ Xs[0], k + D)).real)
    Xs = tuple_(rng, 4)
    assert T.trace_ineq_holder(Xs, 1, 2) >= -1e-10
    # D = 0: sum_i X_i^0 = l * I, so the gap is (l - 1) Tr Z^k; zero only for one letter
    Z = sum(x @ x for x in Xs)
    assert T.trace_ineq_holder(Xs, 2, 0) == pytest.approx(np.trace(Z @ Z).real, rel=1e-10)
    assert T.trace_ineq_holder(Xs[:1], 2, 0) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        T.trace_ineq_holder(Xs, -1, 0)


def test_flow_k0_closed_form(rng):
    Xs = tuple_(rng, 3)
    traj = T.trapping_flow(Xs, 0, dt=1e-3, steps=200)
    t = traj.times[-1]
    Z0 = sum(x @ x for x in Xs)
    # trivial partition: one block per letter, so sum Tr Z_j over blocks
    assert traj.traces[-1, :, 0].sum() == pytest.approx(math.exp(-4 * t) * np.trace(Z0).real, rel=1e-10)
    assert np.allclose(traj.states[-1][0], math.exp(-2 * t) * Xs[0], atol=1e-10)
    assert np.all(np.diff(traj.times) > 0)


def test_flow_random_k1_monotone(rng):
    for _ in range(10):
        traj = T.trapping_flow(tuple_(rng, 4), 1, steps=100)
        assert traj.monotone and traj.bound_ok


def test_flow_zero_tuple_constant():
    traj = T.trapping_flow([np.zeros((3, 3)), np.zeros((3, 3))], 2, steps=10)
    assert np.all(traj.traces == 0) and traj.monotone


def test_flow_partition(rng):
    traj = T.trapping_flow(tuple_(rng, 3, ell=3), 1, partition=[[1, 2], [3]], steps=50)
    assert traj.traces.shape == (51, 2, 2)
    assert traj.monotone


def test_spectral_jacobian_examples(rng):
    H = random_hermitian(rng, 3)
    assert T.spectral_jacobian(H, lambda x: x, lambda x: np.ones_like(x)) == pytest.approx(1.0)
    H2 = random_hermitian(rng, 2)
    assert T.spectral_jacobian(H2, lambda x: 2 * x, lambda x: 2 + 0 * x) == pytest.approx(16.0, rel=1e-14)
    f = lambda x: x**3 + 2 * x  # noqa: E731
    fp = lambda x: 3 * x**2 + 2  # noqa: E731
    a = T.spectral_jacobian(H, f, fp)
    b = T.numeric_jacobian(H, f)
    assert abs(a - b) <= 1e-4 * a


def test_spectral_jacobian_chain_rule(rng):
    f, fp = (lambda x: x + x**3 / 3), (lambda x: 1 + x**2)
    g, gp = (lambda x: np.sinh(x)), (lambda x: np.cosh(x))
    for _ in range(5):
        H = random_hermitian(rng, 3)
        lam, U = np.linalg.eigh(H)
        fH = (U * f(lam)) @ U.conj().T
        comp = T.spectral_jacobian(H, lambda x: g(f(x)), lambda x: gp(f(x)) * fp(x))
        prod = T.spectral_jacobian(fH, g, gp) * T.spectral_jacobian(H, f, fp)
        assert comp == pytest.approx(prod, rel=1e-8)


def test_spectral_jacobian_errors():
    with pytest.raises(ValueError):
        T.spectral_jacobian(np.eye(2), lambda x: x, lambda x: np.ones_like(x))
    with pytest.raises(ValueError):
        T.spectral_jacobian(np.diag([1.0, 2.0]), lambda x: -x, lambda x: -np.ones_like(x))


def test_insert_points_examples():
    rep = T.insert_points((0.0, 1.0), [], 0.5, 1)
    assert 0 < rep.points[0] < 1 and rep.certified
    rep = T.insert_points((0.0, 1.0), [0.0], 0.5, 1)
    y = rep.points[0]
    assert math.log(y - 0.25) >= math.log(1 / (4 * math.e))
    assert rep.certified
    rep = T.insert_points((-1.0, 1.0), [-1.0, 1.0], 0.5, 1)
    assert rep.points[0] == pytest.approx(0.0, abs=1e-9)


def test_insert_points_many():
    rep = T.insert_points((0.0, 2.0), [0.3, 1.1], 0.3, 6)
    assert rep.certified and len(rep.points) == 6
    with pytest.raises(ValueError):
        T.insert_points((0.0, 1.0), [], 1.0, 1)
