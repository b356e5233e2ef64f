"""Planar maps over colored stars and the perturbative moment series.

A star of type ``q = X_{i_1} ... X_{i_r}`` is a vertex with ``r`` half-edges
colored ``i_1, ..., i_r`` in counterclockwise order.  Gluing half-edges of
equal color in pairs gives a map; faces are the cycles of ``sigma o alpha``
where ``sigma`` turns around vertices and ``alpha`` is the matching.  All
half-edges and stars are labelled, so counts are not divided by symmetries.

For a potential ``beta U + W`` with a unique nondegenerate minimum of ``U``
at ``alpha``, the change of variables ``Y = sqrt(beta) C^{1/2} (X - alpha)``
turns the model into a Gaussian ``(1/2) sum Y_i^2`` plus couplings
``c beta^{-n/2} q(Y)``, and moments of ``Y`` expand in planar maps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg, optimize

from .ncpoly import NCPolynomial, Word

__all__ = [
    "StarType",
    "CombinatorialMap",
    "HALF_EDGE_BUDGET",
    "build_map",
    "iter_matchings",
    "enumerate_planar",
    "count_matchings",
    "Coupling",
    "RescaledModel",
    "rewrite_potential",
    "moment_series",
    "catalan",
    "to_fraction",
]

HALF_EDGE_BUDGET = 14


@dataclass(frozen=True)
class StarType:
    word: Word

    def __post_init__(self) -> None:
        word = tuple(int(c) for c in self.word)
        if not word:
            raise ValueError("a star needs at least one half-edge")
        if min(word) < 1:
            raise ValueError("colors are letters 1..l")
        object.__setattr__(self, "word", word)

    @property
    def valence(self) -> int:
        return len(self.word)


@dataclass
class CombinatorialMap:
    """Rotation ``sigma``, matching ``alpha`` and vertex labels of half-edges."""

    sigma: np.ndarray
    alpha: np.ndarray
    vertex: np.ndarray
    colors: np.ndarray
    nvertices: int

    def __post_init__(self) -> None:
        a = self.alpha
        h = np.arange(len(a))
        if np.any(a == h) or np.any(a[a] != h):
            raise ValueError("alpha must be a fixed-point-free involution")
        if np.any(self.colors[a] != self.colors):
            raise ValueError("alpha must match half-edges of equal color")

    @property
    def nedges(self) -> int:
        return len(self.alpha) // 2

    @property
    def nfaces(self) -> int:
        phi = self.sigma[self.alpha]
        seen = np.zeros(len(phi), dtype=bool)
        faces = 0
        for h in range(len(phi)):
            if seen[h]:
                continue
            faces += 1
            while not seen[h]:
                seen[h] = True
                h = phi[h]
        return faces

    @property
    def connected(self) -> bool:
        parent = list(range(self.nvertices))

        def find(v: int) -> int:
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for h, g in enumerate(self.alpha):
            parent[find(self.vertex[h])] = find(self.vertex[g])
        return len({find(v) for v in range(self.nvertices)}) == 1

    @property
    def genus(self) -> int:
        """Genus from Euler's formula (connected maps only)."""
        chi = self.nvertices - self.nedges + self.nfaces
        g2 = 2 - chi
        if g2 % 2 or g2 < 0:
            raise ValueError(f"Euler characteristic {chi} gives a non-integer genus")
        return g2 // 2


def _layout(stars: Sequence[StarType]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sigma, vertex, colors = [], [], []
    base = 0
    for v, s in enumerate(stars):
        r = s.valence
        sigma.extend(base + (k + 1) % r for k in range(r))
        vertex.extend([v] * r)
        colors.extend(s.word)
        base += r
    return np.array(sigma), np.array(vertex), np.array(colors)


def build_map(stars: Sequence[StarType], alpha: Sequence[int]) -> CombinatorialMap:
    sigma, vertex, colors = _layout(stars)
    return CombinatorialMap(sigma, np.asarray(alpha), vertex, colors, len(stars))


def iter_matchings(colors: Sequence[int]) -> Iterable[np.ndarray]:
    """All color-respecting perfect matchings, smallest unmatched half-edge first."""
    colors = list(colors)
    n = len(colors)
    alpha = [-1] * n

    def rec(start: int):
        h = start
        while h < n and alpha[h] >= 0:
            h += 1
        if h == n:
            yield np.array(alpha)
            return
        for g in range(h + 1, n):
            if alpha[g] < 0 and colors[g] == colors[h]:
                alpha[h], alpha[g] = g, h
                yield from rec(h + 1)
                alpha[h] = alpha[g] = -1

    counts: dict[int, int] = {}
    for c in colors:
        counts[c] = counts.get(c, 0) + 1
    if any(k % 2 for k in counts.values()):
        return
    yield from rec(0)


def count_matchings(colors: Sequence[int]) -> int:
    """``prod (2m - 1)!!`` over color classes of size ``2m``."""
    counts: dict[int, int] = {}
    for c in colors:
        counts[c] = counts.get(c, 0) + 1
    total = 1
    for k in counts.values():
        if k % 2:
            return 0
        total *= math.prod(range(k - 1, 0, -2))
    return total


def _expand(root: StarType, stars: Sequence[tuple[int, StarType]]) -> list[StarType]:
    out = [root]
    for k, s in stars:
        if k < 0:
            raise ValueError("star counts must be nonnegative")
        out.extend([s] * k)
    return out


def enumerate_planar(root: StarType | Sequence[int], stars: Sequence[tuple[int, StarType]] = (),
                     budget: int = HALF_EDGE_BUDGET) -> int:
    """Number of connected genus-zero maps on the root star plus ``k_i`` stars
    of each type ``q_i``, half-edges labelled."""
    root = root if isinstance(root, StarType) else StarType(tuple(root))
    stars = [(k, s if isinstance(s, StarType) else StarType(tuple(s))) for k, s in stars]
    all_stars = _expand(root, stars)
    sigma, vertex, colors = _layout(all_stars)
    if len(colors) > budget:
        raise ValueError(f"{len(colors)} half-edges exceed the budget {budget}")
    count = 0
    for alpha in iter_matchings(colors):
        m = CombinatorialMap(sigma, alpha, vertex, colors, len(all_stars))
        if m.connected and m.genus == 0:
            count += 1
    return count


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def to_fraction(x: float, max_denominator: int = 10**9) -> Fraction:
    return Fraction(x).limit_denominator(max_denominator)


# ---------------------------------------------------------------------------
# rescaled model


@dataclass(frozen=True)
class Coupling:
    """Term ``coeff * beta^{-n/2} * word(Y)`` of the rescaled potential."""

    coeff: complex
    n: int
    word: Word

    def to_json(self) -> dict:
        return {"coeff": [self.coeff.real, self.coeff.imag], "n": self.n, "word": list(self.word)}


@dataclass
class RescaledModel:
    """Potential ``quadratic_coeff * sum Y_i^2 + sum_i c_i beta^{-n_i/2} q_i(Y)``.

    ``edge_weight`` is the Gaussian propagator ``1 / (2 quadratic_coeff)``:
    under ``exp(-N Tr a Y^2)``, ``E[(1/N) Tr Y^2] -> 1/(2a)``.
    """

    alpha: np.ndarray
    hessian: np.ndarray
    couplings: list[Coupling] = field(default_factory=list)
    quadratic_coeff: Fraction = Fraction(1, 2)
    nvars: int = 1

    @property
    def edge_weight(self) -> Fraction:
        return 1 / (2 * self.quadratic_coeff)

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "hessian": self.hessian.tolist(),
            "quadratic_coeff": str(self.quadratic_coeff),
            "edge_weight": str(self.edge_weight),
            "couplings": [c.to_json() for c in self.couplings],
        }


def _commutative(P: NCPolynomial) -> dict[tuple[int, ...], float]:
    out: dict[tuple[int, ...], float] = {}
    for w, c in P:
        key = tuple(w.count(i) for i in range(1, P.nvars + 1))
        out[key] = out.get(key, 0.0) + c.real
    return {k: v for k, v in out.items() if v != 0.0}


def _scalar_value_grad_hess(poly: dict[tuple[int, ...], float], nvars: int):
    exps = np.array(list(poly) or [(0,) * nvars], dtype=float).reshape(-1, nvars)
    coef = np.array(list(poly.values()) or [0.0])

    def mono(x, e):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.prod(np.where(e > 0, x ** np.maximum(e, 0), 1.0), axis=-1)

    def f(x):
        return float(coef @ mono(x, exps))

    def grad(x):
        g = np.zeros(nvars)
        for i in range(nvars):
            e = exps.copy()
            k = e[:, i].copy()
            e[:, i] = np.maximum(k - 1, 0)
            g[i] = float((coef * k) @ mono(x, e))
        return g

    def hess(x):
        H = np.zeros((nvars, nvars))
        for i in range(nvars):
            for j in range(nvars):
                e = exps.copy()
                if i == j:
                    k = e[:, i] * (e[:, i] - 1)
                    e[:, i] = np.maximum(e[:, i] - 2, 0)
                else:
                    k = e[:, i] * e[:, j]
                    e[:, i] = np.maximum(e[:, i] - 1, 0)
                    e[:, j] = np.maximum(e[:, j] - 1, 0)
                H[i, j] = float((coef * k) @ mono(x, e))
        return H

    return f, grad, hess


def _scalar_minimizer(U: NCPolynomial, starts: int, seed: int, tol: float = 1e-6) -> np.ndarray:
    f, grad, hess = _scalar_value_grad_hess(_commutative(U), U.nvars)
    rng = np.random.default_rng(seed)
    found: list[tuple[float, np.ndarray]] = []
    for _ in range(starts):
        x0 = rng.normal(scale=2.0, size=U.nvars)
        res = optimize.minimize(f, x0, jac=grad, hess=hess, method="trust-exact",
                                options={"gtol": 1e-12})
        if res.success or np.linalg.norm(grad(res.x)) < 1e-8:
            found.append((float(res.fun), res.x))
    if not found:
        raise ValueError("Newton iterations failed from every start")
    best = min(v for v, _ in found)
    minima = [x for v, x in found if v <= best + tol * (1 + abs(best))]
    ref = minima[0]
    if any(np.linalg.norm(x - ref) > 1e-4 * (1 + np.linalg.norm(ref)) for x in minima):
        raise ValueError("U has several global minima on scalars; the expansion needs a unique one")
    return ref


def rewrite_potential(U: NCPolynomial, W: NCPolynomial | None = None, *, starts: int = 24,
                      seed: int = 0, tol: float = 1e-12) -> RescaledModel:
    """Expand ``beta U + W`` around the scalar minimizer of ``U``.

    With ``X = alpha + beta^{-1/2} C^{-1/2} Y`` the quadratic part of
    ``beta U`` becomes ``(1/2) sum Y_i^2``; degree-``d`` terms of ``U`` get
    ``beta^{-(d-2)/2}`` and degree-``d`` terms of ``W`` get ``beta^{-d/2}``.
    Constants are dropped.
    """
    nvars = U.nvars
    W = NCPolynomial.zero(nvars) if W is None else W
    if W.nvars != nvars:
        raise ValueError("U and W must share the alphabet")
    alpha = _scalar_minimizer(U, starts, seed)
    _, _, hess = _scalar_value_grad_hess(_commutative(U), nvars)
    C = hess(alpha)
    C = 0.5 * (C + C.T)
    evals = np.linalg.eigvalsh(C)
    if evals[0] <= 1e-10 * max(1.0, abs(evals[-1])):
        raise ValueError(f"Hessian of U at the minimum is not positive definite (eigenvalues {evals})")
    # snap the minimizer to nearby simple rationals so exact models stay exact
    alpha = np.array([float(to_fraction(a, 10**6)) if abs(a - float(to_fraction(a, 10**6))) < 1e-9 else a
                      for a in alpha])
    Cih = np.real(linalg.inv(linalg.sqrtm(C)))
    images = {}
    for i in range(1, nvars + 1):
        img = NCPolynomial.constant(alpha[i - 1], nvars)
        for j in range(1, nvars + 1):
            if Cih[i - 1, j - 1] != 0:
                img = img + Cih[i - 1, j - 1] * NCPolynomial.var(j, nvars)
        images[i] = img
    Us = U.substitute(images)
    Ws = W.substitute(images)
    terms: dict[tuple[int, Word], complex] = {}
    for w, c in Us:
        d = len(w)
        if d <= 2:
            continue
        terms[(d - 2, w)] = terms.get((d - 2, w), 0j) + c
    for w, c in Ws:
        if not w:
            continue
        terms[(len(w), w)] = terms.get((len(w), w), 0j) + c
    # check the quadratic part really is (1/2) sum Y_i^2 up to cyclic equivalence
    quad = NCPolynomial({w: c for w, c in Us if len(w) == 2}, nvars)
    target = 0.5 * sum((NCPolynomial.var(i, nvars) ** 2 for i in range(1, nvars + 1)),
                       NCPolynomial.zero(nvars))
    diff = (quad - target).cyclic_class_coefficients()
    if any(abs(v) > 1e-8 for v in diff.values()):
        raise ValueError("quadratic part did not normalize to (1/2) sum Y_i^2")
    lin = [c for w, c in Us if len(w) == 1]
    if any(abs(c) > 1e-8 for c in lin):
        raise ValueError("linear part of U does not vanish at the minimizer")
    couplings = [Coupling(complex(c), n, w) for (n, w), c in sorted(terms.items()) if abs(c) > tol]
    return RescaledModel(alpha, C, couplings, Fraction(1, 2), nvars)


def _exact(c: complex) -> Fraction | complex:
    if abs(c.imag) > 1e-14 * max(1.0, abs(c)):
        return c
    return to_fraction(c.real)


def moment_series(model: RescaledModel, q: Sequence[int], order: int, *,
                  edge_weight: Fraction | None = None,
                  budget: int = HALF_EDGE_BUDGET) -> dict[int, Fraction | complex]:
    """Planar expansion of ``lim E[(1/N) Tr q(Y)]`` in powers of ``beta^{-1/2}``.

    Coefficient of ``beta^{-m/2}``: the sum over star multiplicities
    ``k_i`` with ``sum k_i n_i = m <= order`` of

        prod (-c_i)^{k_i} / k_i!  *  M((1, q), (k_i, q_i))  *  w_e^{#edges}.

    The sign comes from expanding ``exp(-N Tr sum c_i beta^{-n_i/2} q_i)``.
    """
    root = StarType(tuple(q))
    w_e = model.edge_weight if edge_weight is None else Fraction(edge_weight)
    cps = [c for c in model.couplings if c.n <= order]
    series: dict[int, Fraction | complex] = {m: Fraction(0) for m in range(order + 1)}
    ranges = [range(order // c.n + 1) for c in cps]
    for ks in itertools.product(*ranges):
        m = sum(k * c.n for k, c in zip(ks, cps))
        if m > order:
            continue
        half = root.valence + sum(k * len(c.word) for k, c in zip(ks, cps))
        if half % 2:
            continue
        if half > budget:
            raise ValueError(f"order {order} needs {half} half-edges, over the budget {budget}")
        M = enumerate_planar(root, [(k, StarType(c.word)) for k, c in zip(ks, cps) if k], budget)
        if not M:
            continue
        weight: Fraction | complex = Fraction(M) * w_e ** (half // 2)
        for k, c in zip(ks, cps):
            if k:
                weight = weight * _exact(-c.coeff) ** k / math.factorial(k)
        series[m] = series[m] + weight
    return series
