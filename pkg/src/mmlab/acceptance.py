"""Quantitative acceptance checks shared by ``mmlab verify`` and the test suite.

Each check is a function returning a :class:`CheckResult`.  Checks tagged
``fast`` are deterministic numerics; ``mc`` checks run Markov chains and
take minutes.  Seeds are fixed so reruns reproduce the same numbers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from scipy import integrate

from . import equilibrium as eq
from . import gas, maps, sampler, trapping
from .matnum import random_hermitian
from .ncpoly import NCPolynomial

__all__ = ["CheckResult", "Check", "CHECKS", "run_checks", "select"]

Tag = Literal["fast", "mc"]
Progress = Callable[[str], None]


@dataclass
class CheckResult:
    number: int
    name: str
    tag: Tag
    passed: bool
    measured: str
    target: str
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.measured} (target {self.target}) [{self.seconds:.1f}s]"

    def to_json(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "tag": self.tag,
            "passed": self.passed,
            "measured": self.measured,
            "target": self.target,
            "detail": _jsonable(self.detail),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _quiet(_: str) -> None:
    pass


def _x(nvars: int = 1, i: int = 1) -> NCPolynomial:
    return NCPolynomial.var(i, nvars)


def _commutator_square(nvars: int = 2) -> NCPolynomial:
    X, Y = _x(nvars, 1), _x(nvars, 2)
    c = X * Y - Y * X
    return -(c * c)


# ---------------------------------------------------------------------------
# 1-2: Dyson-Schwinger identities and the Gaussian oracle


@lru_cache(maxsize=None)
def _one_matrix_samples(g: float, n: int, seed: int) -> sampler.SampleSet:
    X = _x()
    W = 0.5 * X**2 + g * X**4
    spec = sampler.ModelSpec(1, n, NCPolynomial.zero(1), W, beta=0.0)
    cfg = sampler.ChainConfig(proposal="mala", burn_in=1000, thin=5, samples=1000, chains=100,
                              seed=seed, moment_degree=6)
    return sampler.sample(spec, cfg)


def check_ds_identity(progress: Progress = _quiet) -> CheckResult:
    X = _x()
    Ps = {"1": NCPolynomial.constant(1.0, 1), "X": X, "X^2": X**2, "X^3": X**3}
    rows = []
    ok = True
    for g in (0.0, 0.1):
        for n in (8, 16):
            progress(f"DS identity: g={g}, N={n}")
            s = _one_matrix_samples(g, n, 1)
            for name, P in Ps.items():
                r = sampler.ds_residual(s, P, 1)
                z = abs(r.value) / r.stderr if r.stderr > 0 else math.inf
                ok &= r.within(3.0)
                rows.append({"g": g, "N": n, "P": name, "residual": r.value.real,
                             "stderr": r.stderr, "z": z, "samples": len(s)})
    worst = max(rows, key=lambda r: r["z"])
    return CheckResult(1, "Dyson-Schwinger residuals", "mc", ok,
                       f"max |residual|/stderr = {worst['z']:.2f} over {len(rows)} cases",
                       "<= 3", {"rows": rows})


def check_gaussian_oracle(progress: Progress = _quiet) -> CheckResult:
    X = _x()
    rows = []
    ok = True
    for n in (8, 16):
        progress(f"Gaussian oracle: N={n}")
        s = _one_matrix_samples(0.0, n, 1)
        for k, exact in ((2, 1.0), (4, 2.0 + 1.0 / n**2)):
            m = s.moment(X**k)
            good = m.within(3.0, exact)
            ok &= good
            rows.append({"N": n, "k": k, "estimate": m.real, "stderr": m.stderr, "exact": exact,
                         "z": abs(m.real - exact) / m.stderr})
    worst = max(rows, key=lambda r: r["z"])
    return CheckResult(2, "Gaussian moments", "mc", ok,
                       f"max |estimate - exact|/stderr = {worst['z']:.2f}",
                       "<= 3 for tau(X^2) = 1, tau(X^4) = 2 + 1/N^2", {"rows": rows})


# ---------------------------------------------------------------------------
# 3-7: equilibrium problems


def check_flat_energy(progress: Progress = _quiet) -> CheckResult:
    beta = 1e4
    res = eq.minimize(None, 0.0, 1.0, 2000, "mod_log", beta)
    val = math.sqrt(beta) * res.energy
    lo, hi = 2 * math.pi * 0.95, 2 * math.pi * 1.0001
    return CheckResult(3, "flat-interval energy", "fast", lo <= val <= hi,
                       f"sqrt(beta) c = {val:.5f} = {val / (2 * math.pi):.4f} * 2pi",
                       f"[{lo:.4f}, {hi:.4f}]", {"energy": res.energy, "converged": res.converged})


def check_semicircle(progress: Progress = _quiet) -> CheckResult:
    res = eq.minimize(lambda x: 0.5 * x**2, -2.5, 2.5, 2000, "neg_log")
    mu = res.measure
    x = mu.centers
    exact = np.sqrt(np.clip(4.0 - x**2, 0.0, None)) / (2 * math.pi)
    err = float(np.abs(mu.density - exact).max())
    return CheckResult(4, "semicircle law", "fast", err <= 0.02, f"sup error {err:.5f}", "<= 0.02",
                       {"converged": res.converged})


def _quadratic_well(c: float, beta: float, pair_weight: float, m: int = 2000, half: float = 3.0):
    """Minimizer for ``c x^2`` on ``[-half, half] * beta^(-1/6)``."""
    s = beta ** (-1.0 / 6.0)
    return eq.minimize(lambda x: c * x**2, -half * s, half * s, m, "mod_log", beta,
                       pair_weight=pair_weight)


def check_energy_constant(progress: Progress = _quiet) -> CheckResult:
    beta = 1e6
    target = eq.cV_constant(1, [1.0])
    vals = {}
    for w in (1.0, 0.5):
        progress(f"energy constant: pair weight {w}")
        vals[w] = beta ** (1.0 / 3.0) * _quadratic_well(1.0, beta, w).energy
    val = vals[1.0]
    rel = abs(val - target) / target
    return CheckResult(5, "single-well energy constant", "fast", rel <= 0.05,
                       f"beta^(1/3) inf J = {val:.4f} (rel. gap {rel:.3f})",
                       f"{target:.4f} +- 5%",
                       {"pair_weight_1": vals[1.0], "pair_weight_half": vals[0.5],
                        "continuum_limit_pair_weight_1": eq.single_well_energy(1.0, 1, 2 * math.pi),
                        "continuum_limit_pair_weight_half": eq.single_well_energy(1.0, 1, math.pi)})


def _rescaled_l1(res: eq.MinimizeResult, beta: float, nu: Callable) -> float:
    s = beta ** (1.0 / 6.0)
    mu = res.measure
    u = mu.centers * s
    return float(np.sum(np.abs(mu.density / s - nu(u))) * mu.h * s)


def check_limit_density(progress: Progress = _quiet) -> CheckResult:
    beta = 1e6
    c = 0.5
    A = (3 * math.pi) ** (2.0 / 3.0) / 2.0

    def nu(u):
        return np.clip(A - 0.5 * u**2, 0.0, None) / (2 * math.pi)

    l1 = {}
    for w in (0.5, 1.0):
        progress(f"limit density: pair weight {w}")
        l1[w] = _rescaled_l1(_quadratic_well(c, beta, w, half=4.0), beta, nu)
    return CheckResult(6, "rescaled limit density", "fast", l1[0.5] <= 0.05,
                       f"L1 = {l1[0.5]:.4f} (gas rate function, pair weight 1/2)", "<= 0.05",
                       {"l1_pair_weight_half": l1[0.5], "l1_pair_weight_1": l1[1.0], "A": A})


def phi_m_infimum(m: int, c: float = 1.0, p: int = 1, half: float = 3.0) -> float:
    """``inf sum alpha_i c z_i^(2p) + 2 pi m alpha_i^2`` over cells ``z_i`` of width ``1/m``."""
    k = int(round(half * m))
    z = (np.arange(-k, k) + 0.5) / m
    return eq.water_fill(m, c * z ** (2 * p)).objective


def check_water_filling(progress: Progress = _quiet) -> CheckResult:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        m = float(rng.uniform(0.01, 50.0))
        v = rng.uniform(-2.0, 2.0, size=int(rng.integers(2, 60)))
        a = eq.water_fill(m, v).weights
        b = eq.qp_simplex(v, 2 * math.pi * m)
        worst = max(worst, float(np.abs(a - b).max()))
    oracle_ok = worst <= 1e-8
    target = eq.cV_constant(1, [1.0])
    limit = eq.single_well_energy(1.0, 1, 2 * math.pi)
    rows = []
    conv_ok = True
    for m in (50, 200, 1000):
        val = phi_m_infimum(m)
        rows.append({"m": m, "inf_phi_m": val, "gap_to_target": abs(val - target),
                     "gap_to_continuum_limit": abs(val - limit), "allowed": 5.0 / m})
        conv_ok &= abs(val - target) <= 5.0 / m
    last = rows[-1]
    return CheckResult(7, "water filling", "fast", oracle_ok and conv_ok,
                       f"QP max diff {worst:.1e}; inf phi_m(m=1000) = {last['inf_phi_m']:.4f}",
                       f"diff <= 1e-8; |inf phi_m - {target:.4f}| <= 5/m",
                       {"qp_max_diff": worst, "oracle_ok": oracle_ok, "convergence_ok": conv_ok,
                        "continuum_limit": limit, "rows": rows})


# ---------------------------------------------------------------------------
# 8-10: filling fractions and the ball law


def two_well_potential() -> gas.Potential:
    """``(x^2 - 1)^2 (0.3 x^2 + 0.375 x + 0.325)``: wells at -1 and 1 with
    curvatures ``c = 1`` and ``c = 4``."""
    P = np.polynomial.Polynomial([-1.0, 0.0, 1.0]) ** 2 * np.polynomial.Polynomial([0.325, 0.375, 0.3])
    return gas.Potential.polynomial(P.coef)


def check_gas_fractions(progress: Progress = _quiet, threads: int = 1) -> CheckResult:
    pot = two_well_potential()
    cfg = gas.GasConfig(n=40, beta=1e4, potential=pot, sweeps=100_000, burn_in=10_000, thin=20, seed=11)
    wells = cfg.wells
    run = gas.run_gas(cfg, progress=progress)
    frac = gas.filling_fractions(run.samples, wells, eps=0.5)
    pred = gas.predicted_fractions(wells)
    err = float(np.abs(frac - pred).max())
    return CheckResult(8, "commutator gas filling fractions", "mc", err <= 0.08,
                       f"fractions {np.round(frac, 3).tolist()}",
                       f"{np.round(pred, 3).tolist()} +- 0.08",
                       {"curvatures": [w.c for w in wells], "acceptance": run.acceptance,
                        "hop_acceptance": run.hop_acceptance, "energy_drift": run.max_energy_drift,
                        "backend": run.backend})


def check_ball_law(progress: Progress = _quiet, threads: int = 1) -> CheckResult:
    beta, n = 1e4, 48
    U = 0.5 * _commutator_square()
    W = 0.5 * _x(2, 1) ** 2 + 0.5 * _x(2, 2) ** 2
    spec = sampler.ModelSpec(2, n, U, W, beta)
    cfg = sampler.ChainConfig(proposal="gibbs", burn_in=200, thin=2, samples=100, chains=32,
                              seed=5, moment_degree=2, threads=threads)
    progress("ball law: Gibbs sampling")
    s = sampler.sample(spec, cfg)
    m2 = s.moment(_x(2, 1) ** 2)
    val = beta ** (1.0 / 3.0) * m2.real
    target = (3 * math.pi) ** (2.0 / 3.0) / 5.0
    rel = abs(val - target) / target
    A = (3 * math.pi) ** (2.0 / 3.0) / 2.0
    lam = s.spectra[:, 0, :].ravel() * beta ** (1.0 / 6.0)
    edges = np.linspace(-3.5, 3.5, 71)
    hist, _ = np.histogram(lam, bins=edges, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    dens = np.clip(A - 0.5 * centers**2, 0.0, None) / (2 * math.pi)
    l1 = float(np.sum(np.abs(hist - dens)) * (edges[1] - edges[0]))
    passed = rel <= 0.15 and l1 <= 0.1
    return CheckResult(9, "quadratic-quadratic ball law", "mc", passed,
                       f"beta^(1/3) tau(X^2) = {val:.4f} (rel. gap {rel:.3f}); histogram L1 = {l1:.3f}",
                       f"{target:.4f} +- 15%; L1 <= 0.1",
                       {"stderr": beta ** (1.0 / 3.0) * m2.stderr, "samples": len(s)})


def check_one_matrix_fractions(progress: Progress = _quiet, threads: int = 1) -> CheckResult:
    X = _x()
    U = (X**2 - 1.0) ** 2
    W = 0.1 * X**2
    spec = sampler.ModelSpec(1, 32, U, W, beta=1e3)
    cfg = sampler.ChainConfig(proposal="mala", burn_in=2000, thin=10, samples=200, chains=32,
                              seed=3, moment_degree=4, reflect_prob=0.2, threads=threads)
    progress("one-matrix double well: sampling")
    s = sampler.sample(spec, cfg)
    lam = s.spectra[:, 0, :]
    frac = np.array([np.mean(lam < 0), np.mean(lam > 0)])
    err = float(np.abs(frac - 0.5).max())
    return CheckResult(10, "one-matrix filling fractions", "mc", err <= 0.05,
                       f"fractions {np.round(frac, 3).tolist()}", "[0.5, 0.5] +- 0.05",
                       {"acceptance": s.acceptance.mean().item(), "reflect_acceptance": s.reflect_acceptance})


# ---------------------------------------------------------------------------
# 11-16: inequalities, flows, Jacobians, maps, criticality, kernels


def check_inequality_fuzz(progress: Progress = _quiet) -> CheckResult:
    rng = np.random.default_rng(13)
    tol = 1e-10
    bad_comm = bad_holder = 0
    for _ in range(1000):
        n = int(rng.integers(2, 8))
        u, v = (int(t) for t in rng.integers(0, 5, size=2))
        X = random_hermitian(rng, n, float(rng.uniform(0.3, 1.5)))
        if (u + v) % 2:
            X = X @ X
        Y = random_hermitian(rng, n)
        val, ok = trapping.trace_ineq_commutator(X, Y, u, v)
        if not ok:
            raise AssertionError("generated tuple violates the precondition")
        scale = max(1.0, float(np.abs(np.linalg.eigvalsh(X)).max()) ** (u + v)
                    * float(np.linalg.norm(Y)) ** 2)
        bad_comm += val < -tol * scale
    for _ in range(1000):
        ell = int(rng.integers(1, 4))
        n = int(rng.integers(2, 7))
        k, D = (int(t) for t in rng.integers(0, 4, size=2))
        X = [random_hermitian(rng, n, float(rng.uniform(0.3, 1.5))) for _ in range(ell)]
        val = trapping.trace_ineq_holder(X, k, D)
        Z = sum(x @ x for x in X)
        scale = max(1.0, ell**D * n * float(np.abs(np.linalg.eigvalsh(Z)).max()) ** (k + D))
        bad_holder += val < -tol * scale
    rep = trapping.fuzz_trapping(trapping.TrappingSpec(_commutator_square(), 0.0, 0.0), 1000, rng, tol=tol)
    total = bad_comm + bad_holder + rep.violations
    return CheckResult(11, "trace inequality fuzzing", "fast", total == 0,
                       f"violations: commutator {bad_comm}, Holder {bad_holder}, trapping {rep.violations}",
                       "0 of 1000 each",
                       {"trapping_worst": rep.worst})


def check_flow_monotone(progress: Progress = _quiet) -> CheckResult:
    rng = np.random.default_rng(17)
    bad = 0
    worst = 0.0
    for _ in range(100):
        ell = int(rng.integers(1, 4))
        n = int(rng.integers(2, 7))
        k = int(rng.integers(0, 3))
        X = [random_hermitian(rng, n, float(rng.uniform(0.3, 1.5))) for _ in range(ell)]
        traj = trapping.trapping_flow(X, k, steps=60, tol=1e-8)
        bad += not traj.monotone
        worst = max(worst, traj.worst_increase)
    return CheckResult(12, "flow monotonicity", "fast", bad == 0,
                       f"{bad} non-monotone trajectories; worst relative increase {worst:.1e}",
                       "0 of 100 (increase <= 1e-8)", {})


def check_jacobian(progress: Progress = _quiet) -> CheckResult:
    rng = np.random.default_rng(19)
    f = lambda x: x + x**3 / 3.0  # noqa: E731
    fp = lambda x: 1.0 + x**2  # noqa: E731
    worst = 0.0
    for _ in range(20):
        H = random_hermitian(rng, 3)
        a = trapping.spectral_jacobian(H, f, fp)
        b = trapping.numeric_jacobian(H, f)
        worst = max(worst, abs(a - b) / abs(a))
    H = random_hermitian(rng, 2)
    lin = trapping.spectral_jacobian(H, lambda x: 2 * x, lambda x: 2 + 0 * x)
    ok = worst <= 1e-4 and abs(lin - 16.0) <= 1e-12 * 16
    return CheckResult(13, "spectral Jacobian", "fast", ok,
                       f"max rel. error {worst:.1e}; f = 2x gives {lin!r}",
                       "<= 1e-4; 16", {})


def check_planar_maps(progress: Progress = _quiet) -> CheckResult:
    counts = {k: maps.enumerate_planar((1,) * (2 * k)) for k in range(1, 7)}
    catalan_ok = all(counts[k] == maps.catalan(k) for k in counts)
    # the Gaussian model X^2/2 rewritten around its minimum
    X = _x()
    model = maps.rewrite_potential(0.5 * X**2)
    calibrated = 1 / maps.enumerate_planar((1, 1))  # tau(X^2) = 1 = M((1, X^2)) w_e
    s2 = maps.moment_series(model, (1, 1), 0)[0]
    s4 = maps.moment_series(model, (1, 1, 1, 1), 0)[0]
    ok = catalan_ok and model.edge_weight == calibrated and s2 == 1 and s4 == 2
    return CheckResult(14, "planar maps", "fast", ok,
                       f"counts {[counts[k] for k in range(1, 7)]}; w_e = {model.edge_weight}; "
                       f"order-0 tau(X^2), tau(X^4) = {s2}, {s4}",
                       "Catalan numbers; w_e = 1; 1 and 2 (large-N Gaussian moments)",
                       {"calibrated_edge_weight": str(calibrated)})


def check_criticality(progress: Progress = _quiet, threads: int = 1) -> CheckResult:
    U = _commutator_square()
    W = 0.5 * _x(2, 1) ** 2 + 0.5 * _x(2, 2) ** 2
    L = trapping.support_radius(1.0, 0.0, 2)
    rows = []
    for beta in (1e2, 1e3):
        progress(f"criticality: beta={beta:g}")
        spec = sampler.ModelSpec(2, 16, U, W, beta)
        cfg = sampler.ChainConfig(proposal="gibbs", burn_in=200, thin=2, samples=200, chains=32,
                                  seed=23, moment_degree=6, threads=threads)
        rep = sampler.criticality_moments(sampler.sample(spec, cfg), 1, 1, L=L)
        rows.append({"beta": beta, "estimate": rep.estimate.real, "stderr": rep.estimate.stderr,
                     "bound": rep.bound, "B": rep.B, "passed": rep.passed})
    monotone = rows[1]["estimate"] < rows[0]["estimate"]
    ok = monotone and all(r["passed"] for r in rows)
    return CheckResult(15, "criticality bound", "mc", ok,
                       f"tau(|D_X U|^2) = {rows[0]['estimate']:.3e}, {rows[1]['estimate']:.3e}",
                       f"<= B/beta = {rows[0]['bound']:.3e}, {rows[1]['bound']:.3e}; decreasing",
                       {"L": L, "rows": rows})


def check_kernel_math(progress: Progress = _quiet) -> CheckResult:
    total = 2 * integrate.quad(lambda t: float(eq.phi(1.0, t)), 0.0, 1.0, limit=200)[0]
    total += 2 * integrate.quad(lambda t: float(eq.phi(1.0, t)), 1.0, np.inf, limit=200)[0]
    closed = float(eq.phi_antiderivative(1e12) - eq.phi_antiderivative(-1e12))
    quad_err = abs(total - 2 * math.pi)
    m = 100
    mu = eq.GridMeasure.uniform(0.0, 1.0, m)
    x = mu.centers
    w = np.exp(-((x - 0.3) ** 2) / 0.02)
    nu = eq.GridMeasure(0.0, 1.0, w / w.sum())
    d_kernel = eq.coulomb_distance(mu, nu)
    d_fourier = eq.coulomb_distance_fourier(mu, nu)
    gap = abs(d_kernel - d_fourier)
    ok = quad_err <= 1e-8 and gap <= 1e-4
    return CheckResult(16, "kernel identities", "fast", ok,
                       f"|int phi_1 - 2pi| = {quad_err:.1e}; Coulomb distance gap {gap:.1e}",
                       "<= 1e-8; <= 1e-4",
                       {"antiderivative_total": closed, "kernel_form": d_kernel, "fourier_form": d_fourier})


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class Check:
    number: int
    tag: Tag
    func: Callable[..., CheckResult]
    threaded: bool = False


CHECKS: dict[int, Check] = {
    c.number: c
    for c in (
        Check(1, "mc", check_ds_identity),
        Check(2, "mc", check_gaussian_oracle),
        Check(3, "fast", check_flat_energy),
        Check(4, "fast", check_semicircle),
        Check(5, "fast", check_energy_constant),
        Check(6, "fast", check_limit_density),
        Check(7, "fast", check_water_filling),
        Check(8, "mc", check_gas_fractions, True),
        Check(9, "mc", check_ball_law, True),
        Check(10, "mc", check_one_matrix_fractions, True),
        Check(11, "fast", check_inequality_fuzz),
        Check(12, "fast", check_flow_monotone),
        Check(13, "fast", check_jacobian),
        Check(14, "fast", check_planar_maps),
        Check(15, "mc", check_criticality, True),
        Check(16, "fast", check_kernel_math),
    )
}


def select(fast: bool = False, mc: bool = False) -> list[int]:
    tags = {t for t, on in (("fast", fast), ("mc", mc)) if on} or {"fast", "mc"}
    return [n for n, c in CHECKS.items() if c.tag in tags]


def run_one(number: int, progress: Progress = _quiet, threads: int = 1) -> CheckResult:
    c = CHECKS[number]
    t0 = time.perf_counter()
    res = c.func(progress, threads=threads) if c.threaded else c.func(progress)
    res.seconds = time.perf_counter() - t0
    return res


def run_checks(numbers: list[int] | None = None, progress: Progress = _quiet,
               threads: int = 1) -> list[CheckResult]:
    numbers = sorted(CHECKS) if numbers is None else numbers
    out = []
    for n in numbers:
        res = run_one(n, progress, threads)
        progress(res.line())
        out.append(res)
    return out
