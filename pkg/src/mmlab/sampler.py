"""Markov chain Monte Carlo for multi-matrix Gibbs laws.

The target on ``l``-tuples of ``N x N`` Hermitian matrices is

    exp(-N Tr V(X)) dX,    V = beta U + W,

with ``dX`` the Lebesgue measure on the real coordinates (diagonal, real and
imaginary parts of the upper triangle).  Chains are batched: a state is a
list of ``l`` arrays of shape ``(C, N, N)``, one slice per chain.

Proposals all live in the Frobenius geometry, where a standard Gaussian
Hermitian matrix has diagonal variance 1 and variance 1/2 for each real part
off the diagonal.  The gradient of ``N Tr V`` in that geometry is
``N D_i V(X)``.

Chains are grouped in fixed blocks with their own spawned seed, so output
does not depend on how many worker threads run the blocks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np
from scipy import optimize

from .matnum import EmpiricalLaw, evaluate, normalized_trace, word_traces, words_up_to
from .ncpoly import NCPolynomial, TensorPolynomial, Word, canonical_rotation, is_self_adjoint
from .trapping import support_radius

__all__ = [
    "ModelSpec",
    "ChainConfig",
    "MomentEstimate",
    "SampleSet",
    "energy",
    "grad_energy",
    "run_chain",
    "sample",
    "estimate",
    "ds_residual",
    "criticality_bound",
    "criticality_moments",
    "CriticalityReport",
    "ConcentrationReport",
    "concentration_diagnostics",
    "scalar_minimum",
    "coefficient_norm",
    "commutator_quadratic_form",
]

Proposal = Literal["metropolis-gaussian", "mala", "hmc", "gibbs"]
BLOCK = 32


@dataclass(frozen=True)
class ModelSpec:
    """``exp(-N Tr(beta U + W))`` on ``nvars`` matrices of size ``n``."""

    nvars: int
    n: int
    U: NCPolynomial
    W: NCPolynomial
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.nvars < 1:
            raise ValueError("need at least one matrix of size >= 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        for name, P in (("U", self.U), ("W", self.W)):
            if P.nvars != self.nvars:
                raise ValueError(f"{name} has {P.nvars} letters, model has {self.nvars}")
            if not is_self_adjoint(P, 1e-12):
                raise ValueError(f"{name} is not self-adjoint")

    @property
    def V(self) -> NCPolynomial:
        return (self.beta * self.U + self.W).cyclic_symmetrized()

    def gradients(self) -> list[NCPolynomial]:
        V = self.V
        return [V.D(i) for i in range(1, self.nvars + 1)]


def _hermitian_part(G: np.ndarray) -> np.ndarray:
    return 0.5 * (G + np.swapaxes(G.conj(), -1, -2))


def _check_tuple(spec: ModelSpec, X) -> list[np.ndarray]:
    X = [np.asarray(x) for x in X]
    if len(X) != spec.nvars:
        raise ValueError(f"expected {spec.nvars} matrices, got {len(X)}")
    for x in X:
        if x.shape[-2:] != (spec.n, spec.n):
            raise ValueError(f"expected {spec.n}x{spec.n} matrices, got {x.shape[-2:]}")
    return X


def energy(spec: ModelSpec, X, V: NCPolynomial | None = None) -> float | np.ndarray:
    """``N Tr V_beta(X)``; batched over leading axes."""
    X = _check_tuple(spec, X)
    V = spec.V if V is None else V
    tr = normalized_trace(V, X) * spec.n**2
    imag = np.max(np.abs(np.imag(tr)))
    if imag > 1e-9 * max(1.0, float(np.max(np.abs(tr)))):
        raise ValueError(f"energy has imaginary part {imag}; is the potential self-adjoint?")
    return float(np.real(tr)) if np.ndim(tr) == 0 else np.real(tr)


def grad_energy(spec: ModelSpec, X, grads: Sequence[NCPolynomial] | None = None) -> list[np.ndarray]:
    """Frobenius gradient ``N D_i V(X)`` of ``N Tr V``, one Hermitian matrix per letter."""
    X = _check_tuple(spec, X)
    grads = spec.gradients() if grads is None else grads
    return [spec.n * _hermitian_part(evaluate(g, X)) for g in grads]


def commutator_quadratic_form(V: NCPolynomial, tol: float = 1e-10) -> tuple[float, float, float] | None:
    """``(gamma, a1, a2)`` if ``V = -gamma [X1, X2]^2 + a1 X1^2 + a2 X2^2`` up to
    cyclic equivalence with ``gamma >= 0`` and ``a1, a2 > 0``, else ``None``."""
    if V.nvars != 2:
        return None
    cls = V.cyclic_class_coefficients()
    gamma = -cls.get((1, 2, 1, 2), 0j).real / 2.0
    a1 = cls.get((1, 1), 0j).real
    a2 = cls.get((2, 2), 0j).real
    if gamma < 0 or a1 <= 0 or a2 <= 0:
        return None
    X1, X2 = NCPolynomial.var(1, 2), NCPolynomial.var(2, 2)
    C = X1 * X2 - X2 * X1
    ref = (-gamma * C * C + a1 * X1 * X1 + a2 * X2 * X2).cyclic_class_coefficients()
    keys = set(cls) | set(ref)
    if any(abs(cls.get(k, 0j) - ref.get(k, 0j)) > tol * max(1.0, gamma) for k in keys):
        return None
    return gamma, a1, a2


def _conditional_gaussian(rng: np.random.Generator, lam: np.ndarray, a: float, gamma: float,
                          n: int) -> np.ndarray:
    """Draw ``Z`` from ``exp(-N sum_ij |Z_ij|^2 (a + gamma (lam_i - lam_j)^2))``
    (the conditional law of one matrix in the eigenbasis of the other)."""
    d = lam[..., :, None] - lam[..., None, :]
    var = 1.0 / (2.0 * n * (a + gamma * d * d))
    G = (rng.standard_normal(var.shape) + 1j * rng.standard_normal(var.shape)) * np.sqrt(var / 2.0)
    Z = np.triu(G, 1)
    Z = Z + np.swapaxes(Z.conj(), -1, -2)
    idx = np.arange(lam.shape[-1])
    Z[..., idx, idx] = rng.standard_normal(lam.shape) * np.sqrt(var[..., idx, idx])
    return Z


def _gaussian_hermitian(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Standard Gaussian in the Frobenius geometry."""
    A = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return (A + np.swapaxes(A.conj(), -1, -2)) / 2.0


def _frob2(H: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.einsum("...ab,...ab->...", h.conj(), h).real for h in H)


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings.

    ``step`` is the proposal scale (``None`` picks ``0.5 / sqrt(N (1 + beta))``)
    and is adapted by Robbins-Monro toward ``target_acceptance`` during
    burn-in, then frozen.  ``reflect_prob`` enables a spectral reflection
    move ``lambda -> 2 c - lambda`` of one eigenvalue (one-matrix models).
    """

    proposal: Proposal = "mala"
    step: float | None = None
    burn_in: int = 500
    thin: int = 5
    samples: int = 1000
    chains: int = 16
    seed: int = 0
    moment_degree: int = 6
    leapfrog: int = 10
    target_acceptance: float = 0.4
    reflect_prob: float = 0.0
    reflect_center: float = 0.0
    adapt: bool = True
    threads: int = 1

    def __post_init__(self) -> None:
        if self.proposal not in ("metropolis-gaussian", "mala", "hmc", "gibbs"):
            raise ValueError(f"unknown proposal {self.proposal!r}")
        if self.step is not None and not self.step > 0:
            raise ValueError("step size must be positive")
        if self.samples < 1 or self.chains < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("samples, chains and thinning must be positive")
        if not 0.0 <= self.reflect_prob <= 1.0:
            raise ValueError("reflect_prob must lie in [0, 1]")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class _Block:
    """A batch of chains sharing one random stream."""

    def __init__(self, spec: ModelSpec, config: ChainConfig, nchains: int, seed: np.random.SeedSequence):
        self.spec = spec
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.V = spec.V
        self.grads = spec.gradients()
        n = spec.n
        step = config.step or 0.5 / math.sqrt(n * (1.0 + spec.beta))
        self.log_step = math.log(step)
        self.shape = (nchains, n, n)
        # start at the Gaussian scale of the quadratic part, not at the origin
        start = 1.0 / math.sqrt(n * (1.0 + spec.beta))
        self.X = [start * _gaussian_hermitian(self.rng, self.shape) for _ in range(spec.nvars)]
        self.E = energy(spec, self.X, self.V)
        needs_grad = config.proposal in ("mala", "hmc")
        self.G = grad_energy(spec, self.X, self.grads) if needs_grad else None
        self.form = None
        if config.proposal == "gibbs":
            self.form = commutator_quadratic_form(self.V)
            if self.form is None:
                raise ValueError("gibbs needs V = -gamma [X1, X2]^2 + a1 X1^2 + a2 X2^2")
        self.accepted = np.zeros(nchains)
        self.proposed = 0
        self.reflect_accepted = np.zeros(nchains)
        self.reflect_proposed = 0

    @property
    def step(self) -> float:
        return math.exp(self.log_step)

    def _accept(self, log_ratio: np.ndarray) -> np.ndarray:
        u = self.rng.random(log_ratio.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            ok = np.log(u) < log_ratio
        return ok & np.isfinite(log_ratio)

    def _commit(self, ok, Xn, En, Gn):
        m = ok[:, None, None]
        self.X = [np.where(m, xn, x) for xn, x in zip(Xn, self.X)]
        self.E = np.where(ok, En, self.E)
        if Gn is not None:
            self.G = [np.where(m, gn, g) for gn, g in zip(Gn, self.G)]

    def move(self) -> np.ndarray:
        """One proposal per chain; returns the per-chain acceptance mask."""
        cfg, spec = self.config, self.spec
        h = self.step
        xi = [_gaussian_hermitian(self.rng, self.shape) for _ in range(spec.nvars)]
        if cfg.proposal == "gibbs":
            return self._gibbs()
        if cfg.proposal == "metropolis-gaussian":
            Xn = [x + h * z for x, z in zip(self.X, xi)]
            En = energy(spec, Xn, self.V)
            ok = self._accept(self.E - En)
            self._commit(ok, Xn, En, None)
        elif cfg.proposal == "mala":
            Xn = [x - 0.5 * h * h * g + h * z for x, g, z in zip(self.X, self.G, xi)]
            En = energy(spec, Xn, self.V)
            Gn = grad_energy(spec, Xn, self.grads)
            fwd = _frob2([xn - x + 0.5 * h * h * g for xn, x, g in zip(Xn, self.X, self.G)])
            bwd = _frob2([x - xn + 0.5 * h * h * g for xn, x, g in zip(Xn, self.X, Gn)])
            ok = self._accept(self.E - En + (fwd - bwd) / (2 * h * h))
            self._commit(ok, Xn, En, Gn)
        else:
            # leapfrog with a jittered step to avoid periodic orbits
            eps = h * self.rng.uniform(0.8, 1.2)
            P = xi
            K0 = 0.5 * _frob2(P)
            Xn = list(self.X)
            G = self.G
            P = [p - 0.5 * eps * g for p, g in zip(P, G)]
            # a divergent trajectory ends non-finite and is rejected by _accept
            with np.errstate(over="ignore", invalid="ignore"):
                for s in range(cfg.leapfrog):
                    Xn = [x + eps * p for x, p in zip(Xn, P)]
                    G = grad_energy(spec, Xn, self.grads)
                    scale = eps if s < cfg.leapfrog - 1 else 0.5 * eps
                    P = [p - scale * g for p, g in zip(P, G)]
                En = energy(spec, Xn, self.V)
                ok = self._accept(self.E + K0 - En - 0.5 * _frob2(P))
            self._commit(ok, Xn, En, G)
        self.proposed += 1
        self.accepted += ok
        return ok

    def _gibbs(self) -> np.ndarray:
        """Exact conditional draws of X1 given X2, then X2 given X1."""
        gamma, a1, a2 = self.form
        n = self.spec.n
        for target, other, a in ((0, 1, a1), (1, 0, a2)):
            lam, Q = np.linalg.eigh(self.X[other])
            Z = _conditional_gaussian(self.rng, lam, a, gamma, n)
            self.X[target] = _hermitian_part(Q @ Z @ np.swapaxes(Q.conj(), -1, -2))
        # energies are not needed by this move; leave them stale until read
        self.E = None
        ok = np.ones(self.shape[0], dtype=bool)
        self.proposed += 1
        self.accepted += ok
        return ok

    def reflect(self) -> None:
        """Reflect one eigenvalue per chain about ``reflect_center``.

        The move keeps the eigenvectors; in spectral coordinates it is a
        volume-preserving involution, so the acceptance ratio is the
        Boltzmann factor times the squared Vandermonde ratio.
        """
        if self.spec.nvars != 1:
            raise ValueError("spectral reflection is defined for one-matrix models")
        c = self.config.reflect_center
        lam, Q = np.linalg.eigh(self.X[0])
        C = lam.shape[0]
        k = self.rng.integers(0, lam.shape[1], size=C)
        rows = np.arange(C)
        old = lam[rows, k]
        new = 2.0 * c - old
        lam_n = lam.copy()
        lam_n[rows, k] = new
        with np.errstate(divide="ignore"):
            dv = np.log(np.abs(new[:, None] - lam)) - np.log(np.abs(old[:, None] - lam))
        dv[rows, k] = 0.0
        Xn = [(Q * lam_n[:, None, :]) @ np.swapaxes(Q.conj(), -1, -2)]
        Xn[0] = _hermitian_part(Xn[0])
        En = energy(self.spec, Xn, self.V)
        ok = self._accept(self.E - En + 2.0 * dv.sum(axis=1))
        Gn = grad_energy(self.spec, Xn, self.grads) if self.G is not None else None
        self._commit(ok, Xn, En, Gn)
        self.reflect_proposed += 1
        self.reflect_accepted += ok

    def step_once(self) -> np.ndarray:
        ok = self.move()
        if self.config.reflect_prob > 0 and self.rng.random() < self.config.reflect_prob:
            self.reflect()
        return ok

    def burn(self) -> None:
        cfg = self.config
        for k in range(1, cfg.burn_in + 1):
            ok = self.step_once()
            if cfg.adapt and cfg.proposal != "gibbs":
                self.log_step += (ok.mean() - cfg.target_acceptance) / k**0.6
        self.accepted[:] = 0
        self.proposed = 0


@dataclass
class MomentEstimate:
    value: complex
    stderr: float
    ess: float

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def within(self, nsigma: float = 3.0, target: complex = 0.0) -> bool:
        return abs(self.value - target) <= nsigma * self.stderr

    def to_json(self) -> dict:
        return {"value": [float(np.real(self.value)), float(np.imag(self.value))],
                "stderr": self.stderr, "ess": self.ess}


def estimate(values: np.ndarray, chain: np.ndarray, nbatches: int = 20) -> MomentEstimate:
    """Mean with a batch-means standard error.

    Batches are whole chains when there are at least ``nbatches`` chains,
    otherwise each chain is cut into contiguous pieces.
    """
    values = np.asarray(values)
    chain = np.asarray(chain)
    ids = np.unique(chain)
    per = max(1, math.ceil(nbatches / len(ids)))
    means = []
    for c in ids:
        v = values[chain == c]
        for piece in np.array_split(v, min(per, len(v))):
            means.append(piece.mean())
    means = np.asarray(means)
    mean = values.mean()
    if len(means) < 2:
        return MomentEstimate(complex(mean), float("inf"), float(len(values)))
    se = math.sqrt(float(np.var(means.real, ddof=1) + np.var(means.imag, ddof=1)) / len(means))
    var = float(np.var(values.real) + np.var(values.imag))
    ess = var / se**2 if se > 0 else float(len(values))
    return MomentEstimate(complex(mean), se, ess)


@dataclass
class SampleSet:
    """Per-sample moment table (canonical cyclic words) and spectra."""

    spec: ModelSpec
    config: ChainConfig
    words: list[Word]
    traces: np.ndarray          # (S, W) complex
    spectra: np.ndarray         # (S, l, N)
    chain: np.ndarray           # (S,) chain id
    acceptance: np.ndarray      # per chain
    steps: np.ndarray           # adapted step per chain
    reflect_acceptance: float | None = None
    index: dict[Word, int] = field(init=False)

    def __post_init__(self) -> None:
        self.index = {w: k for k, w in enumerate(self.words)}

    @property
    def max_degree(self) -> int:
        return self.config.moment_degree

    def __len__(self) -> int:
        return self.traces.shape[0]

    def word(self, w: Sequence[int]) -> np.ndarray:
        w = tuple(w)
        if len(w) > self.max_degree:
            raise ValueError(f"word of length {len(w)} exceeds the moment cap {self.max_degree}")
        return self.traces[:, self.index[canonical_rotation(w)]]

    def trace_of(self, P: NCPolynomial) -> np.ndarray:
        """Per-sample ``(1/N) Tr P``."""
        if P.degree > self.max_degree:
            raise ValueError(f"degree {P.degree} exceeds the moment cap {self.max_degree}")
        out = np.zeros(len(self), dtype=complex)
        for w, c in P:
            out += c * self.word(w)
        return out

    def tensor_of(self, T: TensorPolynomial) -> np.ndarray:
        """Per-sample ``(1/N) Tr (x) (1/N) Tr`` evaluated leg by leg on one sample."""
        out = np.zeros(len(self), dtype=complex)
        for a, b, c in T.legs():
            out += c * self.word(a) * self.word(b)
        return out

    def moment(self, P: NCPolynomial) -> MomentEstimate:
        return estimate(self.trace_of(P), self.chain)

    def operator_norms(self) -> np.ndarray:
        """``max_i ||X_i||`` per sample."""
        return np.abs(self.spectra).max(axis=(1, 2))

    def law(self, k: int) -> EmpiricalLaw:
        return EmpiricalLaw(self.spec.nvars, self.max_degree, self.spec.n,
                            {w: complex(self.traces[k, j]) for j, w in enumerate(self.words)})

    def acceptance_ok(self) -> bool:
        if self.config.proposal == "gibbs":
            return True
        return bool(np.all((self.acceptance >= 0.05) & (self.acceptance <= 0.95)))


def _canonical_words(nvars: int, degree: int) -> list[Word]:
    seen: dict[Word, None] = {}
    for w in words_up_to(nvars, degree):
        seen.setdefault(canonical_rotation(w), None)
    return list(seen)


def _blocks(spec: ModelSpec, config: ChainConfig) -> list[_Block]:
    seeds = np.random.SeedSequence(config.seed).spawn(math.ceil(config.chains / BLOCK))
    sizes = [min(BLOCK, config.chains - BLOCK * b) for b in range(len(seeds))]
    return [_Block(spec, config, s, sd) for s, sd in zip(sizes, seeds)]


def run_chain(spec: ModelSpec, config: ChainConfig) -> Iterator[tuple[list[np.ndarray], EmpiricalLaw]]:
    """Stream ``(snapshot, empirical law)`` of the first chain block.

    Each snapshot is the tuple of the chain-0 matrices after ``thin`` moves.
    """
    block = _blocks(spec, config)[0]
    block.burn()
    for _ in range(config.samples):
        for _ in range(config.thin):
            block.step_once()
        X = [x[0].copy() for x in block.X]
        law = EmpiricalLaw(spec.nvars, config.moment_degree, spec.n)
        words = _canonical_words(spec.nvars, config.moment_degree)
        law.moments = dict(zip(words, word_traces(X, words).tolist()))
        yield X, law
    rate = block.accepted / max(block.proposed, 1)
    if np.any((rate < 0.05) | (rate > 0.95)):
        warnings.warn(f"acceptance {rate.min():.3f}..{rate.max():.3f} outside [0.05, 0.95]; retune the step")


def _run_block(block: _Block, words: list[Word]):
    cfg = block.config
    block.burn()
    C = block.shape[0]
    traces = np.empty((cfg.samples, C, len(words)), dtype=complex)
    spectra = np.empty((cfg.samples, C, block.spec.nvars, block.spec.n))
    for s in range(cfg.samples):
        for _ in range(cfg.thin):
            block.step_once()
        traces[s] = word_traces(block.X, words)
        spectra[s] = np.stack([np.linalg.eigvalsh(x) for x in block.X], axis=1)
    return traces, spectra


def sample(spec: ModelSpec, config: ChainConfig) -> SampleSet:
    """Run all chains and collect per-sample moments up to ``moment_degree``.

    ``config.samples`` samples are kept per chain.
    """
    words = _canonical_words(spec.nvars, config.moment_degree)
    blocks = _blocks(spec, config)
    if config.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(lambda b: _run_block(b, words), blocks))
    else:
        results = [_run_block(b, words) for b in blocks]
    traces, spectra, chain = [], [], []
    offset = 0
    for tr, sp in results:
        S, C = tr.shape[:2]
        traces.append(tr.transpose(1, 0, 2).reshape(S * C, -1))
        spectra.append(sp.transpose(1, 0, 2, 3).reshape(S * C, spec.nvars, spec.n))
        chain.append(np.repeat(np.arange(offset, offset + C), S))
        offset += C
    acc = np.concatenate([b.accepted / max(b.proposed, 1) for b in blocks])
    steps = np.concatenate([np.full(b.shape[0], b.step) for b in blocks])
    refl = None
    if config.reflect_prob > 0:
        refl = float(sum(b.reflect_accepted.sum() for b in blocks)
                     / max(sum(b.reflect_proposed * b.shape[0] for b in blocks), 1))
    out = SampleSet(spec, config, words, np.concatenate(traces), np.concatenate(spectra),
                    np.concatenate(chain), acc, steps, refl)
    if not out.acceptance_ok():
        warnings.warn(f"acceptance {acc.min():.3f}..{acc.max():.3f} outside [0.05, 0.95]; retune the step")
    return out


# ---------------------------------------------------------------------------
# diagnostics


def ds_residual(samples: SampleSet, P: NCPolynomial, i: int) -> MomentEstimate:
    """``E[tau(D_i V P)] - E[tau (x) tau(d_i P)]``.

    Integration by parts makes this exactly zero at every finite ``N`` for
    a polynomial potential, so it is an unbiased zero-mean statistic.
    """
    spec = samples.spec
    DV = spec.V.D(i)
    if DV.degree + P.degree > samples.max_degree:
        raise ValueError(
            f"deg D_iV + deg P = {DV.degree + P.degree} exceeds the moment cap {samples.max_degree}")
    vals = samples.trace_of(DV * P) - samples.tensor_of(P.partial(i))
    return estimate(vals, samples.chain)


def coefficient_norm(P: NCPolynomial | TensorPolynomial, L: float) -> float:
    """``sum |coeff| L^deg``, an upper bound for the norm over all tuples with
    ``||x_i|| <= L``.  Tensors use the sum of products of leg bounds."""
    if isinstance(P, TensorPolynomial):
        return float(sum(abs(c) * L ** (len(a) + len(b)) for a, b, c in P.legs()))
    return float(sum(abs(c) * L ** len(w) for w, c in P))


def criticality_bound(U: NCPolynomial, W: NCPolynomial, L: float) -> float:
    """``B = 4 max_i (||D_i U D_i W||_L + 2 ||d_i D_i U||_L)`` with
    coefficient-sum norms."""
    best = 0.0
    for i in range(1, U.nvars + 1):
        DU = U.cyclic_symmetrized().D(i)
        DW = W.cyclic_symmetrized().D(i)
        best = max(best, coefficient_norm(DU * DW, L) + 2.0 * coefficient_norm(DU.partial(i), L))
    return 4.0 * best


@dataclass
class CriticalityReport:
    estimate: MomentEstimate
    B: float
    L: float
    bound: float
    k: int

    @property
    def passed(self) -> bool:
        return self.estimate.real <= self.bound

    def to_json(self) -> dict:
        return {"estimate": self.estimate.to_json(), "B": self.B, "L": self.L,
                "bound": self.bound, "k": self.k, "passed": self.passed}


def criticality_moments(samples: SampleSet, i: int, k: int = 1, *, L: float) -> CriticalityReport:
    """Estimate ``tau(|D_i U|^{2k})`` and compare with ``(B / beta)^k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    spec = samples.spec
    DU = spec.U.cyclic_symmetrized().D(i)
    est = samples.moment(DU ** (2 * k))
    B = criticality_bound(spec.U, spec.W, L)
    bound = (B / spec.beta) ** k if spec.beta > 0 else math.inf
    return CriticalityReport(est, B, L, bound, k)


def scalar_minimum(U: NCPolynomial, starts: int = 32, seed: int = 0) -> tuple[float, np.ndarray]:
    """Minimum of ``U`` restricted to scalar tuples, by multistart BFGS."""
    coeffs: dict[tuple[int, ...], float] = {}
    for w, c in U:
        key = tuple(w.count(i) for i in range(1, U.nvars + 1))
        coeffs[key] = coeffs.get(key, 0.0) + c.real
    powers = np.array(list(coeffs), dtype=float).reshape(-1, U.nvars)
    cvals = np.array(list(coeffs.values()))

    def f(x):
        return float(cvals @ np.prod(x[None, :] ** powers, axis=1))

    rng = np.random.default_rng(seed)
    best = (math.inf, np.zeros(U.nvars))
    for _ in range(starts):
        res = optimize.minimize(f, rng.normal(scale=2.0, size=U.nvars), method="BFGS")
        if res.fun < best[0]:
            best = (float(res.fun), res.x)
    return best


@dataclass
class ConcentrationReport:
    L: float
    norm_threshold: float
    norm_frequency: float
    trace_threshold: float
    trace_frequency: float
    mean_trace_U: MomentEstimate
    m: float

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "norm_threshold": self.norm_threshold,
            "norm_frequency": self.norm_frequency,
            "trace_threshold": self.trace_threshold,
            "trace_frequency": self.trace_frequency,
            "mean_trace_U": self.mean_trace_U.to_json(),
            "m": self.m,
        }


def concentration_diagnostics(samples: SampleSet, *, eta: float, A: float, d: int,
                              kappa: float = 0.5, M: float = 1.0,
                              m: float | None = None) -> ConcentrationReport:
    """Frequencies of the two rare events bounded for trapping potentials:
    ``max ||X_i|| >= L^(1/2 + 1/kappa)`` and
    ``tau(U) >= m + (M + l ln beta) / beta``."""
    spec = samples.spec
    L = support_radius(eta, A, d)
    thr = L ** (0.5 + 1.0 / kappa)
    norms = samples.operator_norms()
    if m is None:
        m, _ = scalar_minimum(spec.U)
    tU = samples.trace_of(spec.U).real
    beta = spec.beta
    tthr = m + (M + spec.nvars * math.log(beta)) / beta if beta > 0 else math.inf
    return ConcentrationReport(L, thr, float(np.mean(norms >= thr)), tthr,
                               float(np.mean(tU >= tthr)), estimate(tU, samples.chain), m)
