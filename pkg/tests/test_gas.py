import importlib
import math

import numpy as np
import pytest
from scipy import integrate

from mmlab import gas, sampler
from mmlab._gascore_py import sweeps as py_sweeps
from mmlab.ncpoly import NCPolynomial

QUAD = gas.Potential.polynomial([0.0, 0.0, 0.5])
FLAT = gas.Potential.polynomial([0.0])


def brute_energy(x, beta_kernel, V, law="literal"):
    n = len(x)
    a, b = (n - 1, 1.0) if law == "literal" else (n, 0.5)
    e = a * sum(V(xi) for xi in x)
    for i in range(n):
        for j in range(n):
            if i != j:
                e += b * math.log1p(1.0 / (beta_kernel * (x[i] - x[j]) ** 2))
    return e


def test_pair_kernel_examples():
    assert gas.pair_kernel(1.0, 1.0) == pytest.approx(math.log(2))
    assert gas.pair_kernel(4.0, 0.5) == pytest.approx(math.log(2))
    assert gas.pair_kernel(1.0, 0.0) == math.inf
    total = integrate.quad(lambda t: gas.pair_kernel(1.0, t), -np.inf, np.inf, points=None)[0]
    assert total == pytest.approx(2 * math.pi, rel=1e-8)
    t = np.array([0.5, 1.0, 2.0])
    assert np.all(np.diff(gas.pair_kernel(1.0, t)) < 0)
    assert np.all(gas.pair_kernel(2.0, t) < gas.pair_kernel(1.0, t))


def test_energy_examples():
    cfg = gas.GasConfig(n=2, beta=1.0, potential=FLAT)
    assert gas.gas_energy(np.array([0.0, 1.0]), cfg) == pytest.approx(2 * math.log(2))
    cfg1 = gas.GasConfig(n=1, beta=1.0, potential=FLAT)
    assert gas.gas_energy(np.array([0.3]), cfg1) == 0.0
    with pytest.raises(ValueError):
        gas.gas_energy(np.array([0.5, 0.5]), cfg)


@pytest.mark.parametrize("law", ["literal", "exact"])
def test_energy_brute_force(rng, law):
    pot = gas.Potential.polynomial([0.1, -0.3, -1.0, 0.2, 1.0])
    cfg = gas.GasConfig(n=9, beta=7.0, potential=pot, law=law)
    x = rng.normal(size=9)
    assert gas.gas_energy(x, cfg) == pytest.approx(brute_energy(x, 7.0, pot, law), rel=1e-12)


def test_energy_well_potential(rng):
    wells = [gas.WellSpec(-1.0, 1.0), gas.WellSpec(2.0, 3.0, 2)]
    pot = gas.Potential.from_wells(wells)
    cfg = gas.GasConfig(n=6, beta=3.0, potential=pot)
    x = rng.normal(size=6)
    assert gas.gas_energy(x, cfg) == pytest.approx(brute_energy(x, 3.0, pot), rel=1e-12)


def test_commutator_coefficient_sets_kernel(rng):
    cfg = gas.GasConfig(n=5, beta=10.0, potential=QUAD, gamma=2.0)
    assert cfg.kernel_beta == 4.0
    x = rng.normal(size=5)
    assert gas.gas_energy(x, cfg) == pytest.approx(brute_energy(x, 4.0, QUAD), rel=1e-12)
    assert gas.GasConfig(n=5, beta=10.0, potential=QUAD).kernel_beta == 10.0


def test_translation_and_scaling(rng):
    x = rng.normal(size=7)
    cfg = gas.GasConfig(n=7, beta=3.0, potential=FLAT)
    assert gas.gas_energy(x + 2.5, cfg) == pytest.approx(gas.gas_energy(x, cfg), rel=1e-13)
    alpha = 3.0
    scaled = gas.GasConfig(n=7, beta=alpha**2 * 3.0, potential=FLAT)
    assert gas.gas_energy(x / alpha, scaled) == pytest.approx(gas.gas_energy(x, cfg), rel=1e-13)


def test_wells_from_polynomial():
    # (x^2 - 1)^2 (0.3 x^2 + 0.375 x + 0.325): curvatures 1 and 4
    P = np.polynomial.Polynomial([-1, 0, 1]) ** 2 * np.polynomial.Polynomial([0.325, 0.375, 0.3])
    w = gas.wells_from_polynomial(P.coef)
    assert [round(v.center, 9) for v in w] == [-1.0, 1.0]
    assert [v.c for v in w] == pytest.approx([1.0, 4.0])
    w4 = gas.wells_from_polynomial([0, 0, 0, 0, 2.0])
    assert w4[0].p == 2 and w4[0].c == pytest.approx(2.0)


def test_predicted_fractions():
    W = gas.WellSpec
    assert np.allclose(gas.predicted_fractions([W(0, 1), W(1, 1)]), [0.5, 0.5])
    assert np.allclose(gas.predicted_fractions([W(0, 1), W(1, 4)]), [2 / 3, 1 / 3])
    assert np.allclose(gas.predicted_fractions([W(0, 1), W(1, 1), W(2, 4)]), [0.4, 0.4, 0.2])
    assert np.allclose(gas.predicted_fractions([W(0, 1), W(1, 1, 2)]), [0.0, 1.0])


def test_filling_fractions():
    wells = [gas.WellSpec(-1, 1), gas.WellSpec(1, 4)]
    x = np.array([[-1.1, -0.9, 0.95, 0.0]])
    assert np.allclose(gas.filling_fractions(x, wells, 0.2), [0.5, 0.25])
    with pytest.raises(ValueError):
        gas.filling_fractions(x, wells, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        gas.GasConfig(n=3, beta=0.0, potential=QUAD)
    with pytest.raises(ValueError):
        gas.GasConfig(n=0, beta=1.0, potential=QUAD)
    with pytest.raises(ValueError):
        gas.WellSpec(0.0, -1.0)
    with pytest.raises(ValueError):
        gas.Potential.from_wells([gas.WellSpec(0, 1), gas.WellSpec(0, 2)])
    with pytest.raises(ValueError):
        gas.run_gas(gas.GasConfig(n=3, beta=1.0, potential=gas.Potential.polynomial([0, 0, 0, 1.0])))


def test_sweep_keeps_sorted_and_symmetric():
    cfg = gas.GasConfig(n=10, beta=5.0, potential=QUAD, sweeps=4000, burn_in=500, thin=4, seed=3)
    run = gas.run_gas(cfg)
    assert np.all(np.diff(run.samples, axis=1) >= 0)
    assert abs(run.samples.mean()) < 0.05
    assert run.max_energy_drift < 1e-9
    assert run.acceptance_ok
    st, acc = gas.gas_sweep(run.final, cfg, np.random.default_rng(0))
    assert np.all(np.diff(st.positions) >= 0) and 0 <= acc <= 1


def test_determinism():
    cfg = gas.GasConfig(n=6, beta=20.0, potential=QUAD, sweeps=500, burn_in=100, thin=5, seed=9)
    assert np.array_equal(gas.run_gas(cfg).samples, gas.run_gas(cfg).samples)
    reps = gas.run_replicas(cfg, 3, threads=2)
    assert np.array_equal(reps[1].samples, gas.run_replicas(cfg, 3, threads=1)[1].samples)


def test_backends_agree():
    backend = importlib.import_module("mmlab._backend")
    if backend.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    from mmlab import _gascore

    for pot in (gas.Potential.polynomial([0.2, 0.0, -1.0, 0.0, 1.0]),
                gas.Potential.from_wells([gas.WellSpec(-1, 1), gas.WellSpec(1, 4)])):
        cfg = gas.GasConfig(n=12, beta=50.0, potential=pot)
        kern = gas._Kernel(cfg)
        x0 = np.sort(np.random.default_rng(1).normal(size=12))
        res = []
        for mod in (_gascore, None):
            x = x0.copy()
            r = np.random.default_rng(2)
            if mod is None:
                backend.gascore, saved = importlib.import_module("mmlab._gascore_py"), backend.gascore
                try:
                    out = kern.sweeps(x, 50, 1.0, r, 5, np.zeros((10, 12)))
                finally:
                    backend.gascore = saved
            else:
                out = kern.sweeps(x, 50, 1.0, r, 5, np.zeros((10, 12)))
            res.append((x, out))
        assert np.allclose(res[0][0], res[1][0], rtol=0, atol=1e-12)
        assert res[0][1][:4] == res[1][1][:4]
        assert res[0][1][4] == pytest.approx(res[1][1][4], rel=1e-9, abs=1e-9)
    assert callable(py_sweeps)


def test_reconstruct_Y(rng):
    n = 200
    Y = gas.reconstruct_Y(np.zeros(n), 1e6, rng)
    assert np.allclose(Y, Y.conj().T)
    # equal positions: a GUE matrix with semicircle radius 2
    assert np.linalg.norm(Y, 2) == pytest.approx(2.0, rel=0.1)
    x = np.linspace(-1, 1, n)
    Ys = gas.reconstruct_Y(x, 1e6, rng)
    assert np.linalg.norm(Ys, 2) < 0.5 * np.linalg.norm(Y, 2)


def test_y_norm_rate():
    betas = [1e2, 1e3, 1e4, 1e5, 1e6]
    rng = np.random.default_rng(0)
    norms = []
    for b in betas:
        run = gas.run_gas(gas.GasConfig(n=40, beta=b, potential=QUAD, sweeps=4000, burn_in=2000,
                                        thin=100, seed=1))
        norms.append(np.mean([np.linalg.norm(gas.reconstruct_Y(x, b / 2, rng), 2) for x in run.samples]))
    slope = np.polyfit(np.log(betas), np.log(norms), 1)[0]
    predicted = math.log(gas.y_norm_scale(10.0)) / math.log(10.0)
    assert predicted == pytest.approx(-1 / 15)
    assert abs(slope - predicted) <= 0.3 * abs(predicted)


def _commutator_model(beta, n):
    X, Y = NCPolynomial.var(1, 2), NCPolynomial.var(2, 2)
    C = X * Y - Y * X
    return sampler.ModelSpec(2, n, 0.5 * (-1.0 * C * C), 0.5 * X * X + 0.5 * Y * Y, beta)


def test_gas_matches_matrix_sampler():
    beta, n = 4.0, 8
    g = gas.run_gas(gas.GasConfig(n=n, beta=beta, potential=QUAD, law="exact", sweeps=200_000,
                                  burn_in=5000, thin=4, seed=2))
    m = sampler.sample(_commutator_model(beta, n),
                       sampler.ChainConfig(proposal="gibbs", burn_in=100, thin=1, samples=1500, chains=64,
                                           seed=2, moment_degree=2))
    edges = np.linspace(-2.5, 2.5, 21)
    hg, _ = np.histogram(g.samples.ravel(), bins=edges, density=True)
    hm, _ = np.histogram(m.spectra[:, 0, :].ravel(), bins=edges, density=True)
    l1 = np.sum(np.abs(hg - hm)) * (edges[1] - edges[0])
    assert l1 <= 0.05


@pytest.mark.parametrize("law,kappa", [("literal", 2 * math.pi), ("exact", math.pi)])
def test_partition_scaling_runs(law, kappa):
    cfg = gas.GasConfig(n=6, beta=100.0, potential=gas.Potential.polynomial([0, 0, 1.0]), law=law,
                        sweeps=400, burn_in=200, thin=4, seed=1)
    rows = gas.partition_scaling(cfg, [100.0, 200.0], nodes=5)
    assert len(rows) == 2
    from mmlab.equilibrium import cV_constant, single_well_energy

    assert rows[0].target == pytest.approx(single_well_energy(1.0, 1, kappa))
    assert rows[0].formula_constant == pytest.approx(cV_constant(1, [1.0]))
    assert all(math.isfinite(r.scaled) for r in rows)
    with pytest.raises(ValueError):
        gas.partition_scaling(cfg, [1.0], nodes=4)
