"""Finite formal linear combinations with exact coefficients."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Generic, Hashable, Iterable, Iterator, TypeVar, Union

B = TypeVar("B", bound=Hashable)
Coeff = Union[int, Fraction]


class LinearCombination(Generic[B]):
    """Sum of basis elements with exact rational coefficients.

    Zero coefficients are never stored, so two combinations are equal exactly
    when their term dictionaries are equal.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: dict | Iterable | None = None):
        self._terms: dict[B, Fraction] = {}
        if terms is None:
            return
        items = terms.items() if isinstance(terms, dict) else terms
        for basis, c in items:
            self._add(basis, c)

    @classmethod
    def basis(cls, b: B, coeff: Coeff = 1) -> "LinearCombination[B]":
        return cls([(b, coeff)])

    def _add(self, b: B, c: Coeff) -> None:
        if c == 0:
            return
        v = self._terms.get(b, Fraction(0)) + Fraction(c)
        if v == 0:
            del self._terms[b]
        else:
            self._terms[b] = v

    @property
    def terms(self) -> dict[B, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __iter__(self) -> Iterator[B]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __getitem__(self, b: B) -> Fraction:
        return self._terms.get(b, Fraction(0))

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, LinearCombination):
            return self._terms == other._terms
        if other == 0:
            return not self._terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __add__(self, other: "LinearCombination[B]") -> "LinearCombination[B]":
        out = LinearCombination(self._terms)
        for b, c in other.items():
            out._add(b, c)
        return out

    def __neg__(self) -> "LinearCombination[B]":
        return LinearCombination({b: -c for b, c in self._terms.items()})

    def __sub__(self, other: "LinearCombination[B]") -> "LinearCombination[B]":
        return self + (-other)

    def __rmul__(self, k: Coeff) -> "LinearCombination[B]":
        return LinearCombination({b: k * c for b, c in self._terms.items()})

    __mul__ = __rmul__

    def map(self, f: Callable[[B], "LinearCombination"]) -> "LinearCombination":
        """Extend ``f`` (basis -> combination) linearly."""
        out = LinearCombination()
        for b, c in self._terms.items():
            for b2, c2 in f(b).items():
                out._add(b2, c * c2)
        return out

    def bilinear(self, other: "LinearCombination", f: Callable) -> "LinearCombination":
        """Extend ``f`` (basis x basis -> combination) bilinearly."""
        out = LinearCombination()
        for a, ca in self._terms.items():
            for b, cb in other.items():
                for b2, c2 in f(a, b).items():
                    out._add(b2, ca * cb * c2)
        return out

    def tensor(self, other: "LinearCombination") -> "LinearCombination":
        return self.bilinear(other, lambda a, b: LinearCombination.basis((a, b)))

    def evaluate(self, f: Callable[[B], complex]) -> complex:
        """Apply a scalar-valued linear functional."""
        return sum(float(c) * f(b) for b, c in self._terms.items())

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for b, c in sorted(self._terms.items(), key=lambda kv: repr(kv[0])):
            parts.append(f"{c}*{b!r}")
        return " + ".join(parts)
