"""Dense Hermitian-matrix numerics.

Matrices are plain numpy arrays.  A matrix tuple is a sequence of ``l``
arrays of a common shape ``(..., N, N)``; leading batch axes are allowed
everywhere so that many snapshots or chains are processed together.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .ncpoly import NCPolynomial, Word, canonical_rotation

__all__ = [
    "check_hermitian",
    "eigenvalues",
    "eigh",
    "evaluate",
    "normalized_trace",
    "operator_norm",
    "commutator",
    "word_traces",
    "EmpiricalLaw",
    "empirical_law",
    "words_up_to",
    "spectral_function",
    "random_hermitian",
    "hermitian_coordinates",
    "from_hermitian_coordinates",
    "MAX_WORDS",
]

HERMITIAN_RTOL = 1e-12
MAX_WORDS = 200_000


def check_hermitian(H: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    H = np.asarray(H)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {H.shape}")
    scale = max(np.abs(H).max(initial=0.0), 1.0)
    if np.abs(H - np.swapaxes(H.conj(), -1, -2)).max(initial=0.0) > rtol * scale:
        raise ValueError("matrix is not Hermitian")
    return H


def eigenvalues(H: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (LAPACK ``heevd``)."""
    return np.linalg.eigvalsh(check_hermitian(H))


def eigh(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(check_hermitian(H))


def operator_norm(H: np.ndarray) -> float | np.ndarray:
    """Spectral norm ``max |eigenvalue|`` of Hermitian input."""
    lam = eigenvalues(H)
    return np.maximum(-lam[..., 0], lam[..., -1])


def commutator(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def _as_tuple(X) -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [X]
    return [np.asarray(x) for x in X]


class _ProductCache:
    """Memoised prefix products of words over a fixed matrix tuple."""

    def __init__(self, X: Sequence[np.ndarray]):
        self.X = X
        shape = X[0].shape
        self.eye = np.broadcast_to(np.eye(shape[-1], dtype=complex), shape)
        self.cache: dict[Word, np.ndarray] = {}

    def product(self, word: Word) -> np.ndarray:
        if not word:
            return self.eye
        hit = self.cache.get(word)
        if hit is not None:
            return hit
        if len(word) == 1:
            out = self.X[word[0] - 1]
        else:
            out = self.product(word[:-1]) @ self.X[word[-1] - 1]
        self.cache[word] = out
        return out

    def trace(self, word: Word) -> np.ndarray:
        """Unnormalized trace of the word product, one matmul saved."""
        n = self.X[0].shape[-1]
        if not word:
            return np.full(self.X[0].shape[:-2], float(n), dtype=complex)
        if len(word) == 1:
            return np.trace(self.X[word[0] - 1], axis1=-2, axis2=-1).astype(complex)
        A = self.product(word[:-1])
        B = self.X[word[-1] - 1]
        return np.einsum("...ab,...ba->...", A, B)


def _check_alphabet(P: NCPolynomial, X: Sequence[np.ndarray]) -> None:
    if P.nvars != len(X):
        raise ValueError(f"polynomial has {P.nvars} letters but tuple has {len(X)} matrices")
    shapes = {x.shape for x in X}
    if len(shapes) != 1:
        raise ValueError(f"matrices of different shapes: {shapes}")


def evaluate(P: NCPolynomial, X) -> np.ndarray:
    """Matrix ``P(X_1, ..., X_l)`` by accumulating word products."""
    X = _as_tuple(X)
    _check_alphabet(P, X)
    cache = _ProductCache(X)
    out = np.zeros(X[0].shape, dtype=complex)
    for w, c in P:
        out = out + c * cache.product(w)
    return out


def normalized_trace(P: NCPolynomial, X) -> complex | np.ndarray:
    """``(1/N) Tr P(X)`` without forming ``P(X)``."""
    X = _as_tuple(X)
    _check_alphabet(P, X)
    cache = _ProductCache(X)
    n = X[0].shape[-1]
    out = np.zeros(X[0].shape[:-2], dtype=complex)
    for w, c in P:
        out = out + c * cache.trace(w)
    out = out / n
    return complex(out) if out.ndim == 0 else out


def word_traces(X, words: Sequence[Word]) -> np.ndarray:
    """Normalized traces of many words, shape ``batch + (len(words),)``."""
    X = _as_tuple(X)
    cache = _ProductCache(X)
    n = X[0].shape[-1]
    cols = [cache.trace(tuple(w)) / n for w in words]
    return np.stack(cols, axis=-1) if cols else np.zeros(X[0].shape[:-2] + (0,), complex)


def words_up_to(nvars: int, degree: int, budget: int = MAX_WORDS) -> list[Word]:
    total = sum(nvars**k for k in range(degree + 1))
    if total > budget:
        raise ValueError(f"{total} words of degree <= {degree} exceed the budget {budget}")
    out: list[Word] = []
    for k in range(degree + 1):
        out.extend(itertools.product(range(1, nvars + 1), repeat=k))
    return out


@dataclass
class EmpiricalLaw:
    """Table ``word -> (1/N) Tr(word(X))`` up to a degree cap."""

    nvars: int
    max_degree: int
    dimension: int
    moments: dict[Word, complex] = field(default_factory=dict)

    def __getitem__(self, word: Iterable[int]) -> complex:
        word = tuple(word)
        if word in self.moments:
            return self.moments[word]
        rot = canonical_rotation(word)
        if rot in self.moments:
            return self.moments[rot]
        raise KeyError(f"word {word} not in table (degree cap {self.max_degree})")

    def __call__(self, P: NCPolynomial) -> complex:
        return sum((c * self[w] for w, c in P), 0j)

    def gram_matrix(self) -> np.ndarray:
        half = words_up_to(self.nvars, self.max_degree // 2)
        G = np.empty((len(half), len(half)), dtype=complex)
        for a, v in enumerate(half):
            for b, w in enumerate(half):
                G[a, b] = self[v[::-1] + w]
        return G

    def min_gram_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.gram_matrix())[0])

    def to_json(self) -> dict:
        return {
            "alphabet_size": self.nvars,
            "max_degree": self.max_degree,
            "dimension": self.dimension,
            "moments": [
                {"word": list(w), "value": [m.real, m.imag]} for w, m in self.moments.items()
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def empirical_law(X, degree: int = 8, budget: int = MAX_WORDS) -> EmpiricalLaw:
    """Moments of every word of length ``<= degree`` of a single tuple."""
    if degree < 0:
        raise ValueError("degree cap must be nonnegative")
    X = _as_tuple(X)
    if X[0].ndim != 2:
        raise ValueError("empirical_law takes a single tuple; use word_traces for batches")
    words = words_up_to(len(X), degree, budget)
    vals = word_traces(X, words)
    return EmpiricalLaw(len(X), degree, X[0].shape[-1], dict(zip(words, vals.tolist())))


def spectral_function(H: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``f(H) = U f(Lambda) U*`` for a scalar function ``f``."""
    lam, U = eigh(H)
    return (U * f(lam)[..., None, :]) @ np.swapaxes(U.conj(), -1, -2)


def random_hermitian(
    rng: np.random.Generator, n: int, scale: float = 1.0, size: int | tuple[int, ...] = ()
) -> np.ndarray:
    """GUE-type matrix with ``E|H_ab|^2 = scale^2`` for every entry."""
    shape = (size,) if isinstance(size, int) else tuple(size)
    A = rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))
    return scale * (A + np.swapaxes(A.conj(), -1, -2)) / 2.0


def hermitian_coordinates(H: np.ndarray) -> np.ndarray:
    """Real coordinates (diag, Re upper, Im upper) of Lebesgue measure dH."""
    n = H.shape[-1]
    iu = np.triu_indices(n, 1)
    return np.concatenate(
        [np.real(np.diagonal(H, axis1=-2, axis2=-1)), H[..., iu[0], iu[1]].real, H[..., iu[0], iu[1]].imag],
        axis=-1,
    )


def from_hermitian_coordinates(v: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    H = np.zeros(v.shape[:-1] + (n, n), dtype=complex)
    idx = np.arange(n)
    H[..., idx, idx] = v[..., :n]
    H[..., iu[0], iu[1]] = v[..., n:n + m] + 1j * v[..., n + m:]
    H[..., iu[1], iu[0]] = v[..., n:n + m] - 1j * v[..., n + m:]
    return H

