"""Trapping and confinement checks, trace inequalities and matrix flows.

A potential ``V`` is (eta, A, I)-trapping when, for every tuple and k,

    Tr(sum_j Z_j^k sum_{i in I_j} X_i . D_i V) >= Tr(eta sum_j Z_j^{k+1} - A(1 + sum_j Z_j^k))

with ``Z_j = sum_{i in I_j} X_i^2`` and ``X . P = (XP + PX)/2``.  The
definition quantifies over all tuples, so it is only checked on random
families here; ``classify_confining`` gives a syntactic sufficient condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .matnum import (
    check_hermitian,
    eigh,
    evaluate,
    from_hermitian_coordinates,
    hermitian_coordinates,
    random_hermitian,
)
from .ncpoly import NCPolynomial, Word, canonical_rotation, is_self_adjoint

__all__ = [
    "TrappingSpec",
    "trapping_residual",
    "support_radius",
    "ConfiningReport",
    "classify_confining",
    "trace_ineq_commutator",
    "commutator_ineq_oracle",
    "trace_ineq_holder",
    "FlowTrajectory",
    "trapping_flow",
    "spectral_jacobian",
    "numeric_jacobian",
    "insert_points",
    "InsertionReport",
    "FuzzReport",
    "fuzz_trapping",
]

Partition = Sequence[Sequence[int]]


def _trivial_partition(nvars: int) -> list[list[int]]:
    return [[i] for i in range(1, nvars + 1)]


def _check_partition(partition: Partition, nvars: int) -> list[list[int]]:
    blocks = [sorted(int(i) for i in b) for b in partition]
    flat = [i for b in blocks for i in b]
    if sorted(flat) != list(range(1, nvars + 1)) or any(not b for b in blocks):
        raise ValueError(f"{partition!r} is not a partition of 1..{nvars}")
    return blocks


@dataclass(frozen=True)
class TrappingSpec:
    V: NCPolynomial
    eta: float
    A: float
    partition: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        blocks = self.partition or _trivial_partition(self.V.nvars)
        object.__setattr__(
            self, "partition", tuple(tuple(b) for b in _check_partition(blocks, self.V.nvars))
        )
        if not is_self_adjoint(self.V, 1e-12):
            raise ValueError("trapping potential must be self-adjoint")


def _sym(X: np.ndarray, P: np.ndarray) -> np.ndarray:
    return 0.5 * (X @ P + P @ X)


def trapping_residual(spec: TrappingSpec, k: int, X: Sequence[np.ndarray]) -> float:
    """Left side minus right side of the trapping inequality at ``X``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if len(X) != spec.V.nvars:
        raise ValueError("tuple length does not match the alphabet")
    n = X[0].shape[-1]
    eye = np.eye(n)
    lhs = 0.0
    rhs = 0.0
    for block in spec.partition:
        Z = sum(X[i - 1] @ X[i - 1] for i in block)
        Zk = np.linalg.matrix_power(Z, k)
        inner = sum(_sym(X[i - 1], evaluate(spec.V.D(i), X)) for i in block)
        lhs += np.trace(Zk @ inner).real
        rhs += spec.eta * np.trace(Zk @ Z).real - spec.A * np.trace(Zk).real
    rhs -= spec.A * np.trace(eye).real
    return float(lhs - rhs)


def support_radius(eta: float, A: float, d: int) -> float:
    """Almost-sure bound ``L = 32 max((1 + |A|) d / eta, 1)`` on operator norms
    for an (eta, A, I)-trapping potential with ``d`` blocks."""
    if eta <= 0:
        raise ValueError("the support bound needs eta > 0")
    return 32.0 * max((1.0 + abs(A)) * d / eta, 1.0)


# ---------------------------------------------------------------------------
# syntactic classifier


@dataclass
class ConfiningReport:
    confining: bool
    reason: str
    one_body: dict[int, dict[int, float]] = field(default_factory=dict)
    half_degrees: dict[int, int] = field(default_factory=dict)
    interactions: list[tuple[Word, complex]] = field(default_factory=list)
    commutator_terms: dict[tuple[int, int], float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "confining": self.confining,
            "reason": self.reason,
            "one_body": {str(i): {str(d): c for d, c in p.items()} for i, p in self.one_body.items()},
            "half_degrees": {str(i): d for i, d in self.half_degrees.items()},
            "interactions": [{"word": list(w), "coeff": [c.real, c.imag]} for w, c in self.interactions],
            "commutator_terms": [
                {"pair": list(p), "alpha": a} for p, a in self.commutator_terms.items()
            ],
        }


def _commutator_square(i: int, j: int, nvars: int) -> NCPolynomial:
    Xi, Xj = NCPolynomial.var(i, nvars), NCPolynomial.var(j, nvars)
    c = Xi * Xj - Xj * Xi
    return -(c * c)


def classify_confining(
    V: NCPolynomial, partition: Partition | None = None, *, peel_commutators: bool = True, tol: float = 1e-12
) -> ConfiningReport:
    """Try to split ``V`` into one-body terms plus low-degree interactions.

    Works on the trace-equivalent form (coefficients summed over cyclic
    classes).  With the trivial partition, nonnegative multiples of
    ``-[X_i, X_j]^2`` are peeled off first: adding them preserves trapping.
    """
    nvars = V.nvars
    blocks = _check_partition(partition or _trivial_partition(nvars), nvars)
    trivial = all(len(b) == 1 for b in blocks)
    classes = V.cyclic_class_coefficients()

    peeled: dict[tuple[int, int], float] = {}
    if peel_commutators and trivial:
        for i in range(1, nvars + 1):
            for j in range(i + 1, nvars + 1):
                key = canonical_rotation((i, j, i, j))
                c = classes.get(key, 0j)
                if abs(c.imag) > tol or c.real >= -tol:
                    continue
                alpha = -c.real / 2.0
                sub = _commutator_square(i, j, nvars).cyclic_class_coefficients()
                for w, cw in sub.items():
                    classes[w] = classes.get(w, 0j) - alpha * cw
                    if abs(classes[w]) <= tol:
                        del classes[w]
                peeled[(i, j)] = alpha

    one_body: dict[int, dict[int, float]] = {i: {} for i in range(1, nvars + 1)}
    mixed: list[tuple[Word, complex]] = []
    for w, c in classes.items():
        if len(set(w)) == 1:
            if abs(c.imag) > tol:
                return ConfiningReport(False, f"one-body term {w} has a non-real coefficient")
            one_body[w[0]][len(w)] = one_body[w[0]].get(len(w), 0.0) + c.real
        elif w:
            mixed.append((w, c))

    half: dict[int, int] = {}
    for i, poly in one_body.items():
        top = max((d for d, c in poly.items() if abs(c) > tol), default=0)
        if top == 0:
            return ConfiningReport(False, f"letter {i} has no one-body term", one_body=one_body)
        if top % 2:
            return ConfiningReport(False, f"one-body term of X{i} has odd top degree {top}", one_body=one_body)
        if poly[top] <= 0:
            return ConfiningReport(False, f"one-body term of X{i} has nonpositive leading coefficient", one_body=one_body)
        half[i] = top // 2

    for w, c in mixed:
        touched = [b for b in blocks if set(b) & set(w)]
        for b in touched:
            limit = 2 * min(half[i] for i in b) - 1
            if len(w) > limit:
                return ConfiningReport(
                    False,
                    f"interaction {w} of degree {len(w)} exceeds 2*{min(half[i] for i in b)}-1 = {limit}",
                    one_body,
                    half,
                    mixed,
                    peeled,
                )
    return ConfiningReport(True, "decomposition certified", one_body, half, mixed, peeled)


# ---------------------------------------------------------------------------
# trace inequalities


def trace_ineq_commutator(X: np.ndarray, Y: np.ndarray, u: int, v: int) -> tuple[float, bool]:
    """``Tr(X^{u+v} Y^2) - Tr(X^u Y X^v Y)`` and whether the precondition holds.

    The precondition is ``u + v`` even or ``X`` positive semidefinite.
    """
    check_hermitian(X)
    check_hermitian(Y)
    lam = np.linalg.eigvalsh(X)
    ok = (u + v) % 2 == 0 or lam[0] >= -1e-12 * max(1.0, abs(lam).max())
    Xu = np.linalg.matrix_power(X, u)
    Xv = np.linalg.matrix_power(X, v)
    lhs = np.trace(Xu @ Xv @ Y @ Y).real
    rhs = np.trace(Xu @ Y @ Xv @ Y).real
    return float(lhs - rhs), bool(ok)


def commutator_ineq_oracle(X: np.ndarray, Y: np.ndarray, u: int, v: int) -> float:
    """Eigenbasis form ``1/2 sum |Y_ab|^2 (x_a^u - x_b^u)(x_a^v - x_b^v)``."""
    lam, U = eigh(X)
    Yt = U.conj().T @ Y @ U
    du = lam[:, None] ** u - lam[None, :] ** u
    dv = lam[:, None] ** v - lam[None, :] ** v
    return float(0.5 * np.sum(np.abs(Yt) ** 2 * du * dv))


def trace_ineq_holder(X: Sequence[np.ndarray], k: int, D: int) -> float:
    """``l^D Tr(Z^k sum X_i^{2D}) - Tr(Z^{k+D})`` with ``Z = sum X_i^2``."""
    if k < 0 or D < 0:
        raise ValueError("k and D must be nonnegative")
    ell = len(X)
    Z = sum(x @ x for x in X)
    Zk = np.linalg.matrix_power(Z, k)
    S = sum(np.linalg.matrix_power(x, 2 * D) for x in X)
    rhs = ell**D * np.trace(Zk @ S).real
    lhs = np.trace(np.linalg.matrix_power(Z, k + D)).real
    return float(rhs - lhs)


# ---------------------------------------------------------------------------
# decreasing flow


@dataclass
class FlowTrajectory:
    times: np.ndarray
    states: list[list[np.ndarray]]
    traces: np.ndarray  # (steps+1, blocks, k+1) with Tr(Z_j^n), n = 1..k+1
    monotone: bool
    worst_increase: float
    bound_ok: bool
    bound_slack: float


def _flow_rhs(X: list[np.ndarray], blocks: list[list[int]], k: int) -> list[np.ndarray]:
    out: list[np.ndarray] = [None] * len(X)  # type: ignore[list-item]
    for b in blocks:
        Z = sum(X[i - 1] @ X[i - 1] for i in b)
        Zk = np.linalg.matrix_power(Z, k)
        for i in b:
            out[i - 1] = -(Zk @ X[i - 1] + X[i - 1] @ Zk)
    return out


def _block_traces(X: list[np.ndarray], blocks: list[list[int]], k: int) -> np.ndarray:
    rows = []
    for b in blocks:
        Z = sum(X[i - 1] @ X[i - 1] for i in b)
        P = np.eye(Z.shape[0], dtype=complex)
        vals = []
        for _ in range(k + 1):
            P = P @ Z
            vals.append(np.trace(P).real)
        rows.append(vals)
    return np.array(rows)


def trapping_flow(
    X: Sequence[np.ndarray],
    k: int,
    partition: Partition | None = None,
    dt: float | None = None,
    steps: int = 100,
    tol: float = 1e-8,
    strict: bool = False,
) -> FlowTrajectory:
    """RK4 integration of ``dX_i/dt = -(Z_j^k X_i + X_i Z_j^k)``.

    Records ``Tr Z_j^n`` for ``n <= k+1`` and checks that each is
    non-increasing (relative tolerance ``tol``) and that the normalized
    ``Tr Z^{k+1}`` stays above ``B - 4(k+1) t N^{k/(k+1)} B^{(2k+1)/(k+1)}``
    with ``B`` its initial value (per block).
    """
    X = [np.array(x, dtype=complex) for x in X]
    n = X[0].shape[0]
    blocks = _check_partition(partition or _trivial_partition(len(X)), len(X))
    if dt is None:
        znorm = max(np.abs(np.linalg.eigvalsh(sum(X[i - 1] @ X[i - 1] for i in b))).max() for b in blocks)
        dt = 1e-3 / (1.0 + znorm**k)
    times = [0.0]
    states = [[x.copy() for x in X]]
    traces = [_block_traces(X, blocks, k)]
    worst = 0.0
    for s in range(steps):
        k1 = _flow_rhs(X, blocks, k)
        k2 = _flow_rhs([x + 0.5 * dt * a for x, a in zip(X, k1)], blocks, k)
        k3 = _flow_rhs([x + 0.5 * dt * a for x, a in zip(X, k2)], blocks, k)
        k4 = _flow_rhs([x + dt * a for x, a in zip(X, k3)], blocks, k)
        X = [x + dt / 6.0 * (a + 2 * b + 2 * c + d) for x, a, b, c, d in zip(X, k1, k2, k3, k4)]
        X = [0.5 * (x + x.conj().T) for x in X]
        tr = _block_traces(X, blocks, k)
        inc = (tr - traces[-1]) / np.maximum(1.0, np.abs(traces[-1]))
        worst = max(worst, float(inc.max()))
        if strict and inc.max() > tol:
            raise FloatingPointError(f"trace increased by {inc.max():.3e} at step {s}; reduce dt")
        times.append(times[-1] + dt)
        states.append([x.copy() for x in X])
        traces.append(tr)
    traces_arr = np.array(traces)
    t = np.array(times)
    B = traces_arr[0, :, k] / n
    bound = B[None, :] - 4 * (k + 1) * t[:, None] * n ** (k / (k + 1)) * B[None, :] ** ((2 * k + 1) / (k + 1))
    slack = traces_arr[:, :, k] / n - bound
    window = t <= n ** (-k / (k + 1))
    bound_slack = float(slack[window].min())
    return FlowTrajectory(
        t, states, traces_arr, worst <= tol, worst, bound_slack >= -tol * max(1.0, B.max()), bound_slack
    )


# ---------------------------------------------------------------------------
# spectral Jacobian


def spectral_jacobian(H: np.ndarray, f: Callable, fprime: Callable, gap_tol: float = 1e-8) -> float:
    """Jacobian of ``H -> U f(Lambda) U*`` w.r.t. Lebesgue measure on Hermitian matrices.

    ``(Delta(f(lambda))/Delta(lambda))^2 prod_i f'(lambda_i)``.
    """
    lam = np.linalg.eigvalsh(check_hermitian(H))
    if len(lam) > 1 and np.diff(lam).min() < gap_tol:
        raise ValueError("degenerate spectrum")
    d = np.asarray(fprime(lam), dtype=float)
    if np.any(d <= 0):
        raise ValueError("f' must be positive on the spectrum")
    fl = np.asarray(f(lam), dtype=float)
    iu = np.triu_indices(len(lam), 1)
    ratio = (fl[iu[1]] - fl[iu[0]]) / (lam[iu[1]] - lam[iu[0]])
    return float(np.prod(ratio**2) * np.prod(d))


def numeric_jacobian(H: np.ndarray, f: Callable, eps: float = 1e-6) -> float:
    """Central-difference determinant of the entrywise map ``H -> f(H)``."""
    n = H.shape[0]
    x0 = hermitian_coordinates(H)

    def F(x):
        lam, U = np.linalg.eigh(from_hermitian_coordinates(x, n))
        return hermitian_coordinates((U * f(lam)) @ U.conj().T)

    J = np.empty((len(x0), len(x0)))
    for a in range(len(x0)):
        e = np.zeros_like(x0)
        e[a] = eps
        J[:, a] = (F(x0 + e) - F(x0 - e)) / (2 * eps)
    return float(abs(np.linalg.det(J)))


# ---------------------------------------------------------------------------
# point insertion


@dataclass
class InsertionReport:
    points: list[float]
    eps: float
    sums: list[float]
    bounds: list[float]

    @property
    def certified(self) -> bool:
        return all(s >= b - 1e-12 for s, b in zip(self.sums, self.bounds))


def _log_sum(y: np.ndarray, pts: np.ndarray, eps: float) -> np.ndarray:
    gaps = np.abs(y[:, None] - pts[None, :]) - eps
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(gaps > 0, np.log(np.where(gaps > 0, gaps, 1.0)), -np.inf).sum(axis=1)
    return val


def insert_points(
    interval: tuple[float, float],
    existing: Sequence[float],
    eta: float,
    count: int,
    grid: int = 2001,
    refine_iters: int = 100,
) -> InsertionReport:
    """Append ``count`` points, each maximizing ``sum ln(|x_i - y| - eps)``.

    ``eps = eta |I| / (2 N)`` with ``N = len(existing) + count``.  Each new
    point is certified against ``j ln(|I|(1 - eta)/(2e))`` where ``j`` is the
    number of points already present.
    """
    lo, hi = map(float, interval)
    L = hi - lo
    if not 0 < eta < 1 or L <= 0:
        raise ValueError("need 0 < eta < 1 and a nonempty interval")
    pts = [float(x) for x in existing]
    total = len(pts) + count
    eps = eta * L / (2 * total)
    bound_unit = math.log(L * (1 - eta) / (2 * math.e))
    new: list[float] = []
    sums: list[float] = []
    bounds: list[float] = []
    ys = np.linspace(lo, hi, grid)
    phi_gr = (math.sqrt(5) - 1) / 2
    for _ in range(count):
        arr = np.array(pts)
        if len(arr) == 0:
            y = 0.5 * (lo + hi)
            val = 0.0
        else:
            vals = _log_sum(ys, arr, eps)
            best = int(np.argmax(vals))  # argmax returns the leftmost maximizer
            a = ys[max(best - 1, 0)]
            b = ys[min(best + 1, grid - 1)]
            g = lambda t: float(_log_sum(np.array([t]), arr, eps)[0])  # noqa: E731
            c, d = b - phi_gr * (b - a), a + phi_gr * (b - a)
            for _ in range(refine_iters):
                if g(c) >= g(d):
                    b, d = d, c
                    c = b - phi_gr * (b - a)
                else:
                    a, c = c, d
                    d = a + phi_gr * (b - a)
            y = float(ys[best])
            refined = 0.5 * (a + b)
            if g(refined) > g(y) + 1e-13:
                y = refined
            val = g(y)
        bound = len(pts) * bound_unit
        if val < bound - 1e-12:
            raise ArithmeticError(f"point insertion failed to reach the bound ({val} < {bound})")
        pts.append(y)
        new.append(y)
        sums.append(val)
        bounds.append(bound)
    return InsertionReport(new, eps, sums, bounds)


# ---------------------------------------------------------------------------
# randomized verification


@dataclass
class FuzzReport:
    trials: int
    violations: int
    worst: float
    witness: dict | None = None

    def to_json(self) -> dict:
        return {"trials": self.trials, "violations": self.violations, "worst": self.worst, "witness": self.witness}


def fuzz_trapping(
    spec: TrappingSpec,
    trials: int,
    rng: np.random.Generator,
    sizes: Sequence[int] = range(2, 9),
    ks: Sequence[int] = range(0, 4),
    scale: float = 1.0,
    tol: float = 1e-10,
) -> FuzzReport:
    """Evaluate the trapping residual on random tuples; record the worst case."""
    worst = math.inf
    witness = None
    bad = 0
    sizes = list(sizes)
    ks = list(ks)
    for _ in range(trials):
        n = int(rng.choice(sizes))
        k = int(rng.choice(ks))
        X = [random_hermitian(rng, n, scale * rng.uniform(0.2, 2.0)) for _ in range(spec.V.nvars)]
        r = trapping_residual(spec, k, X)
        mx = max(np.abs(np.linalg.eigvalsh(x)).max() for x in X)
        norm = max(1.0, n * mx ** (2 * k + spec.V.degree))
        if r < -tol * norm:
            bad += 1
        if r < worst:
            worst = r
            witness = {"N": n, "k": k, "residual": r}
    return FuzzReport(trials, bad, float(worst), witness)
