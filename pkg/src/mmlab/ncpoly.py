"""Non-commutative polynomials over the letters X_1, ..., X_l.

A polynomial is a table mapping words (tuples of 1-based letter indices) to
complex coefficients.  Words are stored literally: no cyclic normal form is
imposed, so cyclic invariance is a property to be checked rather than an
assumption.

The module provides the involution ``*``, cyclic symmetrization, the cyclic
derivative ``D_i`` (the matrix gradient of ``Tr P``) and the non-commutative
derivative ``d_i`` which splits a word at each occurrence of a letter.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

Word = tuple[int, ...]

__all__ = [
    "Word",
    "NCPolynomial",
    "TensorPolynomial",
    "cyclic_symmetrize",
    "cyclic_derivative",
    "nc_derivative",
    "is_self_adjoint",
    "is_cyclically_invariant",
    "commutator",
    "canonical_rotation",
]


def _prune(terms: Mapping, eps: float) -> dict:
    return {w: c for w, c in terms.items() if abs(c) > eps}


def canonical_rotation(word: Word) -> Word:
    """Lexicographically smallest rotation of ``word``."""
    if not word:
        return word
    return min(word[k:] + word[:k] for k in range(len(word)))


@dataclass(frozen=True)
class NCPolynomial:
    """Element of C<X_1,...,X_l> stored as ``{word: coefficient}``."""

    terms: Mapping[Word, complex]
    nvars: int
    eps: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        if self.nvars < 1:
            raise ValueError("alphabet size must be at least 1")
        clean: dict[Word, complex] = {}
        for w, c in self.terms.items():
            w = tuple(int(i) for i in w)
            for i in w:
                if not 1 <= i <= self.nvars:
                    raise ValueError(f"letter {i} outside alphabet 1..{self.nvars}")
            c = complex(c)
            if abs(c) > self.eps:
                clean[w] = clean.get(w, 0j) + c
        object.__setattr__(self, "terms", _prune(clean, self.eps))

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> NCPolynomial:
        return cls({}, nvars)

    @classmethod
    def constant(cls, value: complex, nvars: int) -> NCPolynomial:
        return cls({(): value}, nvars)

    @classmethod
    def var(cls, i: int, nvars: int) -> NCPolynomial:
        return cls({(i,): 1.0}, nvars)

    @classmethod
    def monomial(cls, word: Iterable[int], nvars: int, coeff: complex = 1.0) -> NCPolynomial:
        return cls({tuple(word): coeff}, nvars)

    # -- basic queries ------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=-1)

    def __iter__(self) -> Iterator[tuple[Word, complex]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def coeff(self, word: Iterable[int]) -> complex:
        return self.terms.get(tuple(word), 0j)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def letters(self) -> set[int]:
        return {i for w in self.terms for i in w}

    def is_homogeneous(self) -> bool:
        return len({len(w) for w in self.terms}) <= 1

    # -- algebra ----------------------------------------------------------
    def _check(self, other: NCPolynomial) -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"alphabet mismatch: {self.nvars} vs {other.nvars}")

    def _coerce(self, other) -> NCPolynomial:
        if isinstance(other, NCPolynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex)):
            return NCPolynomial.constant(other, self.nvars)
        return NotImplemented

    def __add__(self, other) -> NCPolynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = defaultdict(complex, self.terms)
        for w, c in other.terms.items():
            out[w] += c
        return NCPolynomial(out, self.nvars, self.eps)

    __radd__ = __add__

    def __neg__(self) -> NCPolynomial:
        return NCPolynomial({w: -c for w, c in self.terms.items()}, self.nvars, self.eps)

    def __sub__(self, other) -> NCPolynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> NCPolynomial:
        return (-self) + other

    def __mul__(self, other) -> NCPolynomial:
        if isinstance(other, (int, float, complex)):
            return NCPolynomial({w: c * other for w, c in self.terms.items()}, self.nvars, self.eps)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Word, complex] = defaultdict(complex)
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                out[w1 + w2] += c1 * c2
        return NCPolynomial(out, self.nvars, self.eps)

    def __rmul__(self, other) -> NCPolynomial:
        if isinstance(other, (int, float, complex)):
            return self * other
        return NotImplemented

    def __truediv__(self, scalar) -> NCPolynomial:
        return self * (1.0 / scalar)

    def __pow__(self, n: int) -> NCPolynomial:
        if n < 0:
            raise ValueError("negative power")
        out = NCPolynomial.constant(1.0, self.nvars)
        for _ in range(n):
            out = out * self
        return out

    def close_to(self, other: NCPolynomial, tol: float = 1e-12) -> bool:
        return (self - other).is_zero(tol)

    # -- involution and derivatives ------------------------------------------
    def star(self) -> NCPolynomial:
        return NCPolynomial(
            {w[::-1]: c.conjugate() for w, c in self.terms.items()}, self.nvars, self.eps
        )

    def cyclic_symmetrized(self) -> NCPolynomial:
        out = NCPolynomial.zero(self.nvars)
        for w, c in self.terms.items():
            out = out + (cyclic_symmetrize(w, self.nvars) * c if w else
                         NCPolynomial.constant(c, self.nvars))
        return out

    def cyclic_class_coefficients(self) -> dict[Word, complex]:
        """Coefficients summed over cyclic classes (trace-equivalent form)."""
        out: dict[Word, complex] = defaultdict(complex)
        for w, c in self.terms.items():
            out[canonical_rotation(w)] += c
        return {w: c for w, c in out.items() if abs(c) > self.eps}

    def D(self, i: int) -> NCPolynomial:
        return cyclic_derivative(self, i)

    def partial(self, i: int) -> TensorPolynomial:
        return nc_derivative(self, i)

    # -- substitution -----------------------------------------------------
    def substitute(self, images: Mapping[int, NCPolynomial], nvars: int | None = None) -> NCPolynomial:
        """Replace each letter ``i`` by ``images[i]`` (letters absent from the map stay)."""
        target = nvars if nvars is not None else self.nvars
        cache: dict[int, NCPolynomial] = {}

        def image(i: int) -> NCPolynomial:
            if i not in cache:
                cache[i] = images[i] if i in images else NCPolynomial.var(i, target)
            return cache[i]

        out = NCPolynomial.zero(target)
        for w, c in self.terms.items():
            term = NCPolynomial.constant(c, target)
            for i in w:
                term = term * image(i)
            out = out + term
        return out

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "alphabet_size": self.nvars,
            "terms": [
                {"coeff": [c.real, c.imag], "word": list(w)}
                for w, c in sorted(self.terms.items(), key=lambda t: (len(t[0]), t[0]))
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> NCPolynomial:
        if "alphabet_size" not in data:
            raise KeyError("alphabet_size")
        nvars = int(data["alphabet_size"])
        terms: dict[Word, complex] = defaultdict(complex)
        for k, t in enumerate(data.get("terms", [])):
            if "coeff" not in t or "word" not in t:
                raise KeyError(f"terms[{k}]: needs 'coeff' and 'word'")
            c = t["coeff"]
            terms[tuple(t["word"])] += complex(*c) if isinstance(c, list) else complex(c)
        return cls(terms, nvars)

    @classmethod
    def parse(cls, text: str, nvars: int) -> NCPolynomial:
        """Parse expressions like ``"0.5*X1^2 + X1 X2 X1 - 2"``.

        Products are written with spaces or ``*``; powers apply to single
        letters.  Only real numeric coefficients are understood.
        """
        text = text.replace("-", "+-")
        out = NCPolynomial.zero(nvars)
        for chunk in text.split("+"):
            chunk = chunk.strip()
            if not chunk:
                continue
            coeff = 1.0
            word: list[int] = []
            if chunk.startswith("-"):
                coeff = -1.0
                chunk = chunk[1:]
            for tok in re.split(r"[\s*]+", chunk.strip()):
                if not tok:
                    continue
                m = re.fullmatch(r"X(\d+)(?:\^(\d+))?", tok)
                if m:
                    word += [int(m.group(1))] * int(m.group(2) or 1)
                else:
                    coeff *= float(tok)
            out = out + NCPolynomial.monomial(word, nvars, coeff)
        return out

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for w, c in sorted(self.terms.items(), key=lambda t: (len(t[0]), t[0])):
            cs = f"{c.real:g}" if c.imag == 0 else f"({c:g})"
            ws = "".join(f"X{i}" for i in w) or "1"
            parts.append(f"{cs}*{ws}")
        return " + ".join(parts)


@dataclass(frozen=True)
class TensorPolynomial:
    """Element of C<X> (x) C<X> stored as ``{(left, right): coefficient}``."""

    terms: Mapping[tuple[Word, Word], complex]
    nvars: int

    def __post_init__(self) -> None:
        clean: dict[tuple[Word, Word], complex] = defaultdict(complex)
        for (a, b), c in self.terms.items():
            clean[(tuple(a), tuple(b))] += complex(c)
        object.__setattr__(self, "terms", {k: c for k, c in clean.items() if c != 0})

    @classmethod
    def tensor(cls, P: NCPolynomial, Q: NCPolynomial) -> TensorPolynomial:
        P._check(Q)
        return cls({(a, b): ca * cb for a, ca in P for b, cb in Q}, P.nvars)

    def __add__(self, other: TensorPolynomial) -> TensorPolynomial:
        out = defaultdict(complex, self.terms)
        for k, c in other.terms.items():
            out[k] += c
        return TensorPolynomial(out, self.nvars)

    def __sub__(self, other: TensorPolynomial) -> TensorPolynomial:
        return self + other * -1.0

    def __mul__(self, other) -> TensorPolynomial:
        if isinstance(other, (int, float, complex)):
            return TensorPolynomial({k: c * other for k, c in self.terms.items()}, self.nvars)
        out: dict[tuple[Word, Word], complex] = defaultdict(complex)
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                out[(a1 + a2, b1 + b2)] += c1 * c2
        return TensorPolynomial(out, self.nvars)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def flatten(self) -> NCPolynomial:
        """Multiply the two legs: a (x) b -> ab."""
        return NCPolynomial(_merge((a + b, c) for (a, b), c in self.terms.items()), self.nvars)

    def legs(self) -> Iterator[tuple[Word, Word, complex]]:
        for (a, b), c in self.terms.items():
            yield a, b, c


def _merge(pairs: Iterable[tuple[Word, complex]]) -> dict[Word, complex]:
    out: dict[Word, complex] = defaultdict(complex)
    for w, c in pairs:
        out[w] += c
    return out


def _check_letter(i: int, nvars: int) -> None:
    if not 1 <= i <= nvars:
        raise ValueError(f"letter {i} outside alphabet 1..{nvars}")


def cyclic_symmetrize(word: Iterable[int], nvars: int) -> NCPolynomial:
    """Average of the cyclic rotations of a nonempty word."""
    word = tuple(word)
    if not word:
        raise ValueError("cyclic symmetrization of the empty word")
    k = len(word)
    return NCPolynomial(_merge((word[j:] + word[:j], 1.0 / k) for j in range(k)), nvars)


def cyclic_derivative(P: NCPolynomial, i: int) -> NCPolynomial:
    """D_i: sum over occurrences of ``i`` of the word read cyclically after it."""
    _check_letter(i, P.nvars)
    out: dict[Word, complex] = defaultdict(complex)
    for w, c in P:
        for p, letter in enumerate(w):
            if letter == i:
                out[w[p + 1:] + w[:p]] += c
    return NCPolynomial(out, P.nvars)


def nc_derivative(P: NCPolynomial, i: int) -> TensorPolynomial:
    """d_i: split each word at every occurrence of ``i`` into left (x) right."""
    _check_letter(i, P.nvars)
    out: dict[tuple[Word, Word], complex] = defaultdict(complex)
    for w, c in P:
        for p, letter in enumerate(w):
            if letter == i:
                out[(w[:p], w[p + 1:])] += c
    return TensorPolynomial(out, P.nvars)


def is_self_adjoint(P: NCPolynomial, tol: float = 1e-12) -> bool:
    return P.close_to(P.star(), tol)


def is_cyclically_invariant(P: NCPolynomial, tol: float = 1e-12) -> bool:
    return P.close_to(P.cyclic_symmetrized(), tol)


def commutator(P: NCPolynomial, Q: NCPolynomial) -> NCPolynomial:
    return P * Q - Q * P
