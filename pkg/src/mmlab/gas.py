"""Eigenvalue gas of the commutator model and its low-temperature observables.

Integrating the Gaussian matrix ``Y`` out of

    exp(-N Tr(-gamma [X, Y]^2 + V(X) + Y^2 / 2))

leaves a one-dimensional gas on the eigenvalues of ``X`` with the pair
kernel ``phi_b(t) = ln(1 + 1/(b t^2))`` where ``b = 2 gamma``.  Two
normalizations of the gas energy are offered:

* ``law="literal"``: ``(N - 1) sum V(x_i) + sum_{i != j} phi_b(x_i - x_j)``,
  the expansion of ``N^2 J_{b,!=}`` of the empirical measure;
* ``law="exact"``: ``N sum V(x_i) + sum_{i < j} phi_b(x_i - x_j)``, which is
  what the Gaussian integral over ``Y`` produces.

The literal form counts every pair twice.  Filling fractions do not depend
on the choice; energy constants do (see ``partition_scaling``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate

from . import _backend
from .equilibrium import cV_constant, single_well_energy
from .ncpoly import NCPolynomial

__all__ = [
    "WellSpec",
    "Potential",
    "GasConfig",
    "GasState",
    "GasRun",
    "pair_kernel",
    "gas_energy",
    "energy_coefficients",
    "gas_sweep",
    "run_gas",
    "run_replicas",
    "wells_from_polynomial",
    "filling_fractions",
    "predicted_fractions",
    "reconstruct_Y",
    "y_norm_scale",
    "partition_scaling",
    "histogram",
]

GasLaw = Literal["literal", "exact"]
TARGET_ACCEPTANCE = 0.4


@dataclass(frozen=True)
class WellSpec:
    """``V(x) ~ c (x - z)^(2p)`` near the minimizer ``z``."""

    center: float
    c: float
    p: int = 1

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError(f"well curvature must be positive, got {self.c}")
        if self.p < 1:
            raise ValueError(f"flatness exponent must be >= 1, got {self.p}")


def _check_wells(wells: Sequence[WellSpec]) -> None:
    z = [w.center for w in wells]
    if any(b <= a for a, b in zip(z, z[1:])):
        raise ValueError("well centers must be strictly increasing")


@dataclass(frozen=True)
class Potential:
    """Scalar potential: a polynomial, or the minimum of pure well terms.

    ``coeffs`` are ascending polynomial coefficients.  When ``coeffs`` is
    empty the potential is ``min_j c_j (x - z_j)^(2 p_j)`` over ``wells``.
    """

    coeffs: tuple[float, ...] = ()
    wells: tuple[WellSpec, ...] = ()

    def __post_init__(self) -> None:
        if not self.coeffs and not self.wells:
            raise ValueError("potential needs coefficients or wells")
        _check_wells(self.wells)

    @property
    def confining(self) -> bool:
        """``V -> +inf`` at both ends: even degree, positive leading term."""
        if not self.coeffs:
            return True
        deg = len(self.coeffs) - 1
        return deg >= 2 and deg % 2 == 0 and self.coeffs[-1] > 0

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> Potential:
        c = [float(v) for v in coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        return cls(coeffs=tuple(c))

    @classmethod
    def from_wells(cls, wells: Sequence[WellSpec]) -> Potential:
        return cls(wells=tuple(sorted(wells, key=lambda w: w.center)))

    @classmethod
    def from_ncpoly(cls, P: NCPolynomial, tol: float = 1e-12) -> Potential:
        """One-letter self-adjoint polynomial to real ascending coefficients."""
        if P.nvars != 1:
            raise ValueError(f"gas potential takes one letter, got {P.nvars}")
        coeffs = np.zeros(P.degree + 1)
        for w, c in P:
            if abs(c.imag) > tol:
                raise ValueError(f"coefficient of X1^{len(w)} is not real")
            coeffs[len(w)] += c.real
        return cls.polynomial(coeffs)

    @property
    def kind(self) -> int:
        return 0 if self.coeffs else 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.coeffs:
            return np.polynomial.polynomial.polyval(x, self.coeffs)
        z, c, p = self._well_arrays()
        return np.min(c * ((x[..., None] - z) ** 2) ** p, axis=-1)

    def _well_arrays(self):
        z = np.array([w.center for w in self.wells], dtype=float)
        c = np.array([w.c for w in self.wells], dtype=float)
        p = np.array([w.p for w in self.wells], dtype=np.int64)
        return z, c, p

    def wells_or_extract(self) -> tuple[WellSpec, ...]:
        return self.wells if self.wells else tuple(wells_from_polynomial(self.coeffs))

    def to_json(self) -> dict:
        if self.coeffs:
            return {"coefficients": list(self.coeffs)}
        return {"wells": [{"center": w.center, "c": w.c, "p": w.p} for w in self.wells]}


def wells_from_polynomial(coeffs: Sequence[float], tol: float = 1e-7) -> list[WellSpec]:
    """Global minimizers of a real polynomial with their local expansion.

    A minimizer ``z`` gets ``p`` from the first nonvanishing derivative of
    order ``2p`` and ``c = V^(2p)(z) / (2p)!``.
    """
    P = np.polynomial.Polynomial(coeffs)
    crit = P.deriv().roots()
    crit = np.unique(np.round(crit[np.abs(crit.imag) < 1e-6].real, 9))
    if crit.size == 0:
        raise ValueError("polynomial has no real critical point")
    vals = P(crit)
    vmin = vals.min()
    out = []
    for z in crit[vals <= vmin + tol * (1.0 + abs(vmin))]:
        for r in range(2, P.degree() + 1):
            d = P.deriv(r)(z)
            if abs(d) > tol:
                break
        if r % 2 or d <= 0:
            continue
        out.append(WellSpec(float(z), float(d / math.factorial(r)), r // 2))
    if not out:
        raise ValueError("no isolated global minimum found")
    return out


@dataclass(frozen=True)
class GasConfig:
    """Parameters of one gas chain.

    ``gamma`` is the commutator coefficient in ``-gamma N Tr [X, Y]^2``;
    it defaults to ``beta / 2`` and fixes the kernel ``phi_{2 gamma}``.
    ``width`` multiplies the per-well proposal scale
    ``beta^(-1/(2(2p+1)))``; it is adapted during burn-in.
    ``hop_prob`` is the probability that a proposal is a rigid jump between
    two wells instead of a Gaussian step.
    """

    n: int
    beta: float
    potential: Potential
    gamma: float | None = None
    law: GasLaw = "literal"
    width: float = 1.0
    hop_prob: float | None = None
    seed: int = 0
    sweeps: int = 10_000
    burn_in: int = 2_000
    thin: int = 10
    adapt: bool = True

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one particle")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("commutator coefficient gamma must be positive")
        if self.law not in ("literal", "exact"):
            raise ValueError(f"unknown gas law {self.law!r}")
        if self.width <= 0 or self.thin < 1 or self.sweeps < 0 or self.burn_in < 0:
            raise ValueError("invalid chain length or proposal width")

    @property
    def commutator_coefficient(self) -> float:
        return self.beta / 2.0 if self.gamma is None else self.gamma

    @property
    def kernel_beta(self) -> float:
        return 2.0 * self.commutator_coefficient

    @property
    def wells(self) -> tuple[WellSpec, ...]:
        return self.potential.wells_or_extract()

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "gamma": self.commutator_coefficient,
            "law": self.law,
            "potential": self.potential.to_json(),
            "wells": [{"center": w.center, "c": w.c, "p": w.p} for w in self.wells],
            "width": self.width,
            "hop_prob": self.hop_prob,
            "seed": self.seed,
            "sweeps": self.sweeps,
            "burn_in": self.burn_in,
            "thin": self.thin,
        }


@dataclass
class GasState:
    positions: np.ndarray

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.positions, dtype=float)
        if x.ndim != 1:
            raise ValueError("positions must be a vector")
        self.positions = np.sort(x)

    @property
    def n(self) -> int:
        return len(self.positions)


def pair_kernel(beta: float, t):
    """``ln(1 + 1/(beta t^2))``; ``+inf`` at ``t = 0`` or ``beta = 0``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log1p(1.0 / (beta * t * t))
    return float(out) if out.ndim == 0 else out


def energy_coefficients(config: GasConfig, n: int | None = None) -> tuple[float, float]:
    """``(a, b)`` in ``a sum V(x_i) + b sum_{i<j} phi(x_i - x_j)``."""
    n = config.n if n is None else n
    return (n - 1.0, 2.0) if config.law == "literal" else (float(n), 1.0)


class _Kernel:
    """Arguments shared by every call into the backend."""

    def __init__(self, config: GasConfig, interaction: float = 1.0):
        pot = config.potential
        # a non-confining potential (V = 0, say) still has a well-defined energy
        wells = config.wells if pot.confining else ()
        self.a, b = energy_coefficients(config)
        self.b = b * interaction
        self.beta = config.kernel_beta
        self.kind = pot.kind
        self.coeffs = np.ascontiguousarray(pot.coeffs or (0.0,), dtype=float)
        z = np.array([w.center for w in wells], dtype=float)
        c = np.array([w.c for w in wells], dtype=float)
        p = np.array([w.p for w in wells], dtype=np.int64)
        self.centers = np.ascontiguousarray(z)
        if pot.kind == 1:
            self.curv, self.powers = np.ascontiguousarray(c), np.ascontiguousarray(p)
        else:
            self.curv = np.zeros(0)
            self.powers = np.zeros(0, dtype=np.int64)
        self.widths = np.array([config.beta ** (-1.0 / (2 * (2 * w.p + 1))) for w in wells])
        self.width_default = config.beta ** (-1.0 / 6.0)
        shifts = [zb - za for za in z for zb in z if zb != za] if len(z) else []
        self.hop_shifts = np.asarray(shifts, dtype=float)
        if config.hop_prob is None:
            self.hop_prob = 0.05 if len(shifts) else 0.0
        else:
            self.hop_prob = float(config.hop_prob)

    def energy(self, x: np.ndarray) -> float:
        return float(_backend.gascore.energy(
            np.ascontiguousarray(x, dtype=float), self.a, self.b, self.beta, self.kind,
            self.coeffs, self.centers, self.curv, self.powers))

    def sweeps(self, x, nsweeps, scale, rng, thin=0, out=None):
        n = len(x)
        steps = nsweeps * n
        site = rng.integers(0, n, size=steps, dtype=np.int64)
        normals = rng.standard_normal(steps)
        u_accept = rng.random(steps)
        u_hop = rng.random(steps)
        nh = max(len(self.hop_shifts), 1)
        hop_pick = rng.integers(0, nh, size=steps, dtype=np.int64)
        if out is None:
            out = np.zeros((0, n))
        return _backend.gascore.sweeps(
            x, nsweeps, self.a, self.b, self.beta, self.kind, self.coeffs, self.centers,
            self.curv, self.powers, self.widths, self.width_default, scale,
            self.hop_shifts, self.hop_prob, site, normals, u_accept, u_hop, hop_pick,
            thin, out)


def gas_energy(state: GasState | np.ndarray, config: GasConfig, *, interaction: float = 1.0) -> float:
    """Gas energy of a configuration (``+inf`` on coincident points)."""
    x = state.positions if isinstance(state, GasState) else np.sort(np.asarray(state, dtype=float))
    if len(x) != config.n:
        raise ValueError(f"state has {len(x)} points, config expects {config.n}")
    if len(x) > 1 and np.any(np.diff(x) == 0):
        raise ValueError("coincident points")
    return _Kernel(config, interaction).energy(x)


def gas_sweep(state: GasState, config: GasConfig, rng: np.random.Generator,
              scale: float | None = None) -> tuple[GasState, float]:
    """One sweep of ``N`` random-site updates; returns the new state and acceptance."""
    x = state.positions.copy()
    acc, prop, hacc, hprop, _ = _Kernel(config).sweeps(x, 1, config.width if scale is None else scale, rng)
    return GasState(x), (acc + hacc) / max(prop + hprop, 1)


def _initial_positions(config: GasConfig, rng: np.random.Generator) -> np.ndarray:
    wells = config.wells
    n = config.n
    # equal occupation of every well, so no well is favoured at the start
    counts = np.full(len(wells), n // len(wells))
    counts[: n - counts.sum()] += 1
    xs = []
    for w, k in zip(wells, counts):
        half = config.beta ** (-1.0 / (2 * (2 * w.p + 1)))
        xs.append(w.center + half * (np.linspace(-1, 1, k) if k > 1 else np.zeros(k)))
    x = np.concatenate(xs) + 1e-9 * rng.standard_normal(n)
    return np.sort(x)


@dataclass
class GasRun:
    config: GasConfig
    samples: np.ndarray
    final: GasState
    scale: float
    acceptance: float
    hop_acceptance: float
    max_energy_drift: float
    backend: str
    history: list[float] = field(default_factory=list)

    @property
    def acceptance_ok(self) -> bool:
        return 0.05 <= self.acceptance <= 0.95


def run_gas(config: GasConfig, *, x0: np.ndarray | None = None, interaction: float = 1.0,
            chunk: int = 200, progress: Callable[[str], None] | None = None) -> GasRun:
    """Burn-in with Robbins-Monro width adaptation, then a frozen-width run.

    Every ``chunk`` sweeps the running energy (start plus accepted
    increments) is compared to a full recomputation; the largest relative
    discrepancy is reported as ``max_energy_drift``.
    """
    if not config.potential.confining:
        raise ValueError("the gas needs a confining potential (even degree, positive leading coefficient)")
    rng = np.random.default_rng(config.seed)
    kern = _Kernel(config, interaction)
    x = _initial_positions(config, rng) if x0 is None else np.sort(np.asarray(x0, dtype=float)).copy()
    log_scale = math.log(config.width)
    drift = 0.0
    history: list[float] = []

    def check(e_running: float) -> float:
        nonlocal drift
        e_full = kern.energy(x)
        drift = max(drift, abs(e_running - e_full) / max(1.0, abs(e_full)))
        return e_full

    energy = kern.energy(x)
    done, k = 0, 0
    while done < config.burn_in:
        s = min(chunk, config.burn_in - done)
        acc, prop, _, _, de = kern.sweeps(x, s, math.exp(log_scale), rng)
        energy = check(energy + de)
        if config.adapt and prop:
            k += 1
            log_scale += (acc / prop - TARGET_ACCEPTANCE) / k**0.6
        done += s
        history.append(energy)
    scale = math.exp(log_scale)

    nsamp = config.sweeps // config.thin
    samples = np.zeros((nsamp, config.n))
    tot = [0, 0, 0, 0]
    done = row = 0
    while done < config.sweeps:
        s = min(chunk * config.thin, config.sweeps - done)
        rows = s // config.thin
        out = samples[row:row + rows]
        res = kern.sweeps(x, s, scale, rng, config.thin, out)
        for i in range(4):
            tot[i] += res[i]
        energy = check(energy + res[4])
        history.append(energy)
        done += s
        row += rows
        if progress is not None:
            progress(f"gas: {done}/{config.sweeps} sweeps")
    acc = tot[0] / max(tot[1], 1)
    hacc = tot[2] / max(tot[3], 1)
    return GasRun(config, samples[:row], GasState(x), scale, acc, hacc, drift,
                  _backend.BACKEND, history)


def run_replicas(config: GasConfig, replicas: int, threads: int = 1, **kw) -> list[GasRun]:
    """Independent chains with spawned seeds.  The compiled kernel releases
    the GIL, so threads give real parallelism there."""
    seeds = np.random.SeedSequence(config.seed).spawn(replicas)
    cfgs = [replace(config, seed=int(s.generate_state(1)[0])) for s in seeds]
    if threads <= 1:
        return [run_gas(c, **kw) for c in cfgs]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda c: run_gas(c, **kw), cfgs))


# ---------------------------------------------------------------------------
# observables


def predicted_fractions(wells: Sequence[WellSpec]) -> np.ndarray:
    """Limiting well occupations: only the flattest wells (largest ``p``)
    carry mass, in proportion to ``c_j^(-1/(2p))``."""
    p = max(w.p for w in wells)
    u = np.array([w.c ** (-1.0 / (2 * p)) if w.p == p else 0.0 for w in wells])
    return u / u.sum()


def filling_fractions(positions, wells: Sequence[WellSpec], eps: float) -> np.ndarray:
    """Fraction of points within ``eps`` of each well, averaged over samples."""
    z = np.array([w.center for w in wells], dtype=float)
    if len(z) > 1 and eps >= 0.5 * np.diff(np.sort(z)).min():
        raise ValueError("windows overlap: eps must be below half the smallest well gap")
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    inside = np.abs(x[..., None] - z) <= eps
    return inside.mean(axis=(0, 1))


def histogram(samples: np.ndarray, bins: int | np.ndarray = 60,
              range_: tuple[float, float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pooled histogram counts and bin edges of all sampled positions."""
    return np.histogram(np.ravel(samples), bins=bins, range=range_)


def reconstruct_Y(positions, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``Y`` given the eigenvalues of ``X``, in the eigenbasis of ``X``.

    In that basis the conditional law is Gaussian:
    ``Y_ii ~ N(0, 1/N)`` and ``E|Y_ij|^2 = 1 / (N (1 + 2 gamma (x_i - x_j)^2))``.
    """
    x = np.asarray(positions, dtype=float)
    n = len(x)
    var = 1.0 / (n * (1.0 + 2.0 * gamma * (x[:, None] - x[None, :]) ** 2))
    G = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * np.sqrt(var / 2.0)
    Y = np.triu(G, 1)
    Y = Y + Y.conj().T
    Y[np.diag_indices(n)] = rng.standard_normal(n) / math.sqrt(n)
    return Y


def y_norm_scale(beta: float, p: int = 1) -> float:
    """Predicted decay ``beta^(-p/(5(2p+1)))`` of the operator norm of ``Y``."""
    return beta ** (-p / (5.0 * (2 * p + 1)))


# ---------------------------------------------------------------------------
# partition function


def _log_single_particle(config: GasConfig, a: float) -> float:
    """``ln int exp(-a V(x)) dx`` by adaptive quadrature around the wells."""
    pot = config.potential
    wells = config.wells
    vmin = min(float(pot(w.center)) for w in wells)
    pts = sorted({w.center for w in wells})
    lo, hi = pts[0] - 10.0, pts[-1] + 10.0
    f = lambda t: math.exp(-a * (float(pot(t)) - vmin))
    val, _ = integrate.quad(f, lo, hi, points=pts, limit=400, epsabs=0, epsrel=1e-11)
    return math.log(val) - a * vmin


@dataclass
class PartitionRow:
    beta: float
    log_z: float
    free_energy: float          # -ln Z / N^2
    scaled: float               # beta^(1/3) * free_energy
    target: float               # rate-function constant under the chosen law
    formula_constant: float     # closed-form c_W (sum c_j^-1/2)^-2/3
    coarse: bool


def partition_scaling(config: GasConfig, betas: Sequence[float], *, nodes: int = 9,
                      coarse_tol: float = 0.02, **run_kw) -> list[PartitionRow]:
    """Thermodynamic integration of ``ln Z`` over the interaction strength.

    With ``E_lam = a sum V + lam b sum_{i<j} phi``,
    ``ln Z(1) = N ln int e^{-a V} - int_0^1 <b sum phi>_lam dlam``.
    The ``lam`` integral uses Simpson's rule on ``nodes`` uniform points;
    a row is flagged ``coarse`` when Simpson and trapezoid differ by more
    than ``coarse_tol`` of the integral.
    """
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of nodes >= 3")
    wells = config.wells
    if any(w.p != 1 for w in wells):
        raise ValueError("partition scaling is implemented for quadratic wells")
    kappa = 2.0 * math.pi if config.law == "literal" else math.pi
    s = sum(w.c ** -0.5 for w in wells)
    lams = np.linspace(0.0, 1.0, nodes)
    rows = []
    for beta in betas:
        cfg = replace(config, beta=float(beta))
        kern = _Kernel(cfg)
        iu = np.triu_indices(cfg.n, 1)
        means = []
        for lam in lams:
            run = run_gas(cfg, interaction=float(lam), **run_kw)
            X = run.samples
            pairs = pair_kernel(kern.beta, X[:, iu[0]] - X[:, iu[1]]).sum(axis=1)
            means.append(kern.b * pairs.mean())
        means = np.asarray(means)
        simpson = float(integrate.simpson(means, x=lams))
        trap = float(integrate.trapezoid(means, x=lams))
        log_z = cfg.n * _log_single_particle(cfg, kern.a) - simpson
        fe = -log_z / cfg.n**2
        scaled = cfg.beta ** (1.0 / 3.0) * fe
        rows.append(PartitionRow(
            float(beta), log_z, fe, scaled,
            single_well_energy(1.0, 1, kappa) * s ** (-2.0 / 3.0),
            cV_constant(1, [w.c for w in wells]),
            abs(simpson - trap) > coarse_tol * max(abs(simpson), 1e-300),
        ))
    return rows
