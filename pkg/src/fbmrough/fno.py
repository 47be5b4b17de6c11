"""Fourier normal ordering on finite-Fourier-mode paths.

A path is a finite sum of complex exponentials, so the tensor measure
``dGamma(i_1) x ... x dGamma(i_n)`` is a finite set of atoms, each a frequency
tuple with a complex weight.  The atoms are split into sectors according to
the ordering of their frequency magnitudes, each sector is integrated along its
permutation graph, and the pieces are recombined into the one-time character
``chi`` and the two-time rough path ``J``.

Conventions.  Positions ``1..n`` of a word are integration variables with
``x_1 > x_2 > ... > x_n`` (position 1 is the outermost integral).  In the
sector ``sigma`` the label ``r`` of a heap-ordered forest carries the frequency
of position ``sigma[r-1]``, and labels are sorted by increasing magnitude.  An
atom's weight is the coefficient of ``exp(i xi . x)`` in the product of the
derivatives, so that the one-vertex skeleton integral reproduces the path.
"""

from __future__ import annotations

import cmath
import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations, product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import LinearCombination
from .errors import DegenerateDenominator, TieError
from .hopf_trees import DecoratedTree, Forest, antipode, coproduct, shuffle_product

MAX_ORDER = 6


# ------------------------------------------------------------------ paths

@dataclass(frozen=True)
class PathModel:
    """Path ``Gamma_t(i) = sum_k c_{i,k} exp(i w_{i,k} t)``.

    With ``real=True`` every mode is completed by its conjugate partner so the
    path is real valued.  Without it the spectrum is kept as given; a path with
    only positive frequencies is complex valued but never produces a vanishing
    skeleton denominator, which is the setting used for exact tests.
    """

    modes: tuple
    horizon: float = 1.0
    real: bool = False

    def __post_init__(self):
        norm = []
        for coord in self.modes:
            ms = [(float(w), complex(c)) for w, c in coord]
            if self.real:
                ms = ms + [(-w, c.conjugate()) for w, c in ms]
            norm.append(tuple(ms))
        object.__setattr__(self, "modes", tuple(norm))
        self._validate()

    @classmethod
    def from_dict(cls, obj: Mapping) -> "PathModel":
        modes = []
        for coord in obj["modes"]:
            ms = []
            for m in coord:
                c = m.get("amplitude", m.get("c"))
                if isinstance(c, (list, tuple)):
                    c = complex(c[0], c[1])
                ms.append((m.get("frequency", m.get("omega")), complex(c)))
            modes.append(ms)
        return cls(tuple(modes), float(obj.get("horizon", 1.0)), bool(obj.get("real", False)))

    def to_dict(self) -> dict:
        src = self.modes
        if self.real:
            src = tuple(coord[: len(coord) // 2] for coord in src)
        return {
            "horizon": self.horizon,
            "real": self.real,
            "modes": [[{"frequency": w, "amplitude": [c.real, c.imag]} for w, c in coord] for coord in src],
        }

    def _validate(self) -> None:
        mags: dict[float, tuple] = {}
        for i, coord in enumerate(self.modes):
            for k, (w, _) in enumerate(coord):
                if w == 0:
                    raise ValueError("frequencies must be nonzero")
                key = abs(w)
                prev = mags.get(key)
                if prev is not None and not (self.real and prev[0] == i and prev[2] == -w):
                    raise TieError(f"frequency magnitude {key} used by two different modes")
                mags.setdefault(key, (i, k, w))

    @property
    def d(self) -> int:
        return len(self.modes)

    def value(self, i: int, t):
        t = np.asarray(t, dtype=float)
        return sum(c * np.exp(1j * w * t) for w, c in self.modes[i - 1])

    def derivative(self, i: int, t):
        t = np.asarray(t, dtype=float)
        return sum(1j * w * c * np.exp(1j * w * t) for w, c in self.modes[i - 1])

    def atoms(self, word: Sequence[int]) -> list[tuple[tuple[float, ...], complex, tuple]]:
        """Atoms of the tensor measure in position order: (frequencies, weight, mode ids)."""
        per = [[(w, 1j * w * c, (i, k)) for k, (w, c) in enumerate(self.modes[i - 1])] for i in word]
        out = []
        for combo in product(*per):
            xi = tuple(a[0] for a in combo)
            wt = 1 + 0j
            for a in combo:
                wt *= a[1]
            out.append((xi, wt, tuple(a[2] for a in combo)))
        return out

    def check_denominators(self, max_size: int, tol: float = 1e-12) -> None:
        """Raise DegenerateDenominator if some sum of at most ``max_size`` frequencies vanishes."""
        freqs = sorted({w for coord in self.modes for w, _ in coord})
        scale = max(abs(w) for w in freqs)
        for k in range(1, max_size + 1):
            for combo in _multisets(freqs, k):
                if abs(sum(combo)) < tol * scale:
                    raise DegenerateDenominator(f"frequency sum {combo} vanishes")


def _multisets(items: list, k: int):
    if k == 0:
        yield ()
        return
    for i, x in enumerate(items):
        for rest in _multisets(items[i:], k - 1):
            yield (x,) + rest


# ---------------------------------------------------------------- sectors

@dataclass
class SectorMeasure:
    """Atoms of one Fourier sector, re-indexed by label.

    ``atoms`` holds ``(xi, weight)`` with ``xi[r-1]`` the frequency carried by
    label ``r``; magnitudes are non-decreasing in ``r``.
    """

    sigma: tuple
    letters: tuple
    atoms: list = field(default_factory=list)


def split_measure(path: PathModel, word: Sequence[int], ties: str = "split") -> dict[tuple, SectorMeasure]:
    """Partition the tensor-measure atoms among the ``n!`` magnitude sectors.

    An atom whose magnitudes tie (a repeated letter drawing the same mode, or
    a conjugate pair) is shared equally among all sectors compatible with the
    weak ordering when ``ties="split"``; ``ties="error"`` raises TieError.
    """
    word = tuple(word)
    n = len(word)
    if n > MAX_ORDER:
        raise ValueError(f"word longer than {MAX_ORDER}")
    out: dict[tuple, SectorMeasure] = {}
    for xi, wt, _ in path.atoms(word):
        for sigma, frac in _sectors_of(xi, ties):
            sm = out.get(sigma)
            if sm is None:
                sm = out[sigma] = SectorMeasure(sigma, tuple(word[p - 1] for p in sigma))
            sm.atoms.append((tuple(xi[p - 1] for p in sigma), wt * frac))
    return out


def _sectors_of(xi: Sequence[float], ties: str) -> list[tuple[tuple, float]]:
    n = len(xi)
    order = sorted(range(1, n + 1), key=lambda p: abs(xi[p - 1]))
    groups: list[list[int]] = []
    for p in order:
        if groups and abs(xi[p - 1]) == abs(xi[groups[-1][0] - 1]):
            groups[-1].append(p)
        else:
            groups.append([p])
    if all(len(g) == 1 for g in groups):
        return [(tuple(order), 1.0)]
    if ties == "error":
        raise TieError(f"tied magnitudes in atom {tuple(xi)}")
    choices = [list(permutations(g)) for g in groups]
    total = math.prod(len(c) for c in choices)
    return [(tuple(p for g in combo for p in g), 1.0 / total) for combo in product(*choices)]


def sector_of(xi: Sequence[float]) -> tuple:
    """The sector of an atom with distinct magnitudes."""
    return _sectors_of(xi, "error")[0][0]


def pushforward(sectors: Mapping[tuple, SectorMeasure]) -> dict[tuple, complex]:
    """Sum the sector atoms back in position order (inverse of the split)."""
    out: dict[tuple, complex] = {}
    for sigma, sm in sectors.items():
        for xi_lab, w in sm.atoms:
            xi = [0.0] * len(sigma)
            for r, p in enumerate(sigma):
                xi[p - 1] = xi_lab[r]
            key = tuple(xi)
            out[key] = out.get(key, 0) + w
    return out


# ------------------------------------------------------ heap-ordered forests

class HeapOrderedForest(Forest):
    """Forest with distinct integer labels increasing away from the roots."""

    __slots__ = ()

    def __init__(self, trees: Iterable[DecoratedTree] = ()):
        super().__init__(trees)
        seen: set[int] = set()

        def check(t: DecoratedTree) -> None:
            if t.decoration in seen:
                raise ValueError(f"label {t.decoration} repeated")
            seen.add(t.decoration)
            for c in t.children:
                if c.decoration <= t.decoration:
                    raise ValueError("labels must increase away from the root")
                check(c)

        for t in self.trees:
            check(t)

    @classmethod
    def from_parents(cls, parents: Mapping[int, int | None]) -> "HeapOrderedForest":
        kids: dict[int, list[int]] = {v: [] for v in parents}
        for v, p in parents.items():
            if p is not None:
                kids[p].append(v)

        def build(v: int) -> DecoratedTree:
            return DecoratedTree(v, [build(c) for c in kids[v]])

        return cls(build(v) for v, p in parents.items() if p is None)

    def parents(self) -> dict[int, int | None]:
        out: dict[int, int | None] = {}

        def walk(t: DecoratedTree, p: int | None) -> None:
            out[t.decoration] = p
            for c in t.children:
                walk(c, t.decoration)

        for t in self.trees:
            walk(t, None)
        return out


def trunk(n: int) -> HeapOrderedForest:
    return HeapOrderedForest.from_parents({r: (r - 1 if r > 1 else None) for r in range(1, n + 1)})


@lru_cache(maxsize=None)
def permutation_graph(n: int, sigma: tuple) -> LinearCombination:
    """Signed sum of heap-ordered forests equal to the trunk integral in sector ``sigma``.

    The time ordering of labels is the chain ``x_{c_1} > ... > x_{c_n}`` with
    ``c_p`` the label of position ``p``.  The largest label is always a leaf:
    it sits between its chain neighbours ``a`` (above) and ``b`` (below), and
    ``1[x_b < x_m < x_a] = 1[x_m < x_a] - 1[x_m < x_b]``, i.e. the integral
    from ``b`` to ``a`` is the integral up to ``a`` minus the integral up to
    ``b``.  Recursing on the chain with ``m`` removed gives the expansion.
    """
    sigma = tuple(sigma)
    if sorted(sigma) != list(range(1, n + 1)):
        raise ValueError("sigma must be a permutation of 1..n")
    if n > MAX_ORDER:
        raise ValueError(f"n larger than {MAX_ORDER}")
    inv = {p: r for r, p in enumerate(sigma, 1)}
    chain = tuple(inv[p] for p in range(1, n + 1))
    out = LinearCombination()
    for parents, c in _expand_chain(chain).items():
        out._add(HeapOrderedForest.from_parents(dict(parents)), c)
    return out


@lru_cache(maxsize=None)
def _expand_chain(chain: tuple) -> LinearCombination:
    if not chain:
        return LinearCombination.basis(frozenset())
    m = max(chain)
    k = chain.index(m)
    above = chain[k - 1] if k > 0 else None
    below = chain[k + 1] if k + 1 < len(chain) else None
    rest = _expand_chain(chain[:k] + chain[k + 1 :])
    out = LinearCombination()
    for parents, c in rest.items():
        out._add(parents | {(m, above)}, c)
        if below is not None:
            out._add(parents | {(m, below)}, -c)
    return out


# ----------------------------------------------- exact and quadrature integrals

class _ExpPoly:
    """Finite sum of ``c * x**k * exp(i*eta*x)``."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms = terms or {}

    @staticmethod
    def exp(eta: float) -> "_ExpPoly":
        return _ExpPoly({(eta, 0): 1 + 0j})

    def __mul__(self, other: "_ExpPoly") -> "_ExpPoly":
        out: dict = {}
        for (e1, k1), c1 in self.terms.items():
            for (e2, k2), c2 in other.terms.items():
                e = e1 + e2
                if abs(e) < 1e-12 * (abs(e1) + abs(e2) + 1e-300):
                    e = 0.0
                key = (e, k1 + k2)
                out[key] = out.get(key, 0) + c1 * c2
        return _ExpPoly(out)

    def __call__(self, x: float) -> complex:
        return sum(c * x**k * cmath.exp(1j * e * x) for (e, k), c in self.terms.items())

    def integral_from(self, s: float) -> "_ExpPoly":
        out: dict = {}
        for (e, k), c in self.terms.items():
            if e == 0.0:
                key = (0.0, k + 1)
                out[key] = out.get(key, 0) + c / (k + 1)
                continue
            ie = 1j * e
            for j in range(k + 1):
                coef = c * (-1) ** j * math.factorial(k) / math.factorial(k - j) / ie ** (j + 1)
                key = (e, k - j)
                out[key] = out.get(key, 0) + coef
        prim = _ExpPoly(out)
        const = prim(s)
        prim.terms[(0.0, 0)] = prim.terms.get((0.0, 0), 0) - const
        return prim


def forest_integral(forest: Forest, xi: Mapping[int, float], s: float, t: float) -> complex:
    """Exact iterated integral over ``[s, t]`` of ``prod_v exp(i xi_v x_v)`` along the forest order."""

    def g(node: DecoratedTree) -> _ExpPoly:
        f = _ExpPoly.exp(xi[node.decoration])
        for c in node.children:
            f = f * g(c)
        return f.integral_from(s)

    out = 1 + 0j
    for tr in forest.trees:
        out *= g(tr)(t)
    return out


def iterated_integral_quadrature(path: PathModel, word: Sequence[int], s: float, t: float, nodes: int = 24) -> complex:
    """Brute-force nested Gauss-Legendre value of the trunk iterated integral."""
    word = tuple(word)
    n = len(word)
    if n == 0:
        return 1 + 0j
    u, w = np.polynomial.legendre.leggauss(nodes)

    def g(p: int, x: np.ndarray) -> np.ndarray:
        if p == n:
            return np.ones_like(x, dtype=complex)
        y = s + (x[:, None] - s) * (u[None, :] + 1) / 2
        vals = path.derivative(word[p], y) * g(p + 1, y.ravel()).reshape(y.shape)
        return (x - s) / 2 * (vals @ w)

    return complex(g(0, np.array([t], dtype=float))[0])


def iterated_integral_exact(path: PathModel, word: Sequence[int], s: float, t: float) -> complex:
    n = len(word)
    tr = trunk(n)
    return sum(wt * forest_integral(tr, {r: xi[r - 1] for r in range(1, n + 1)}, s, t) for xi, wt, _ in path.atoms(word)) if n else 1 + 0j


def reordered_integral(path: PathModel, word: Sequence[int], s: float, t: float) -> complex:
    """Sum over sectors of the permutation-graph integrals (Fourier normal ordering)."""
    word = tuple(word)
    n = len(word)
    if n == 0:
        return 1 + 0j
    total = 0j
    for sigma, sm in split_measure(path, word).items():
        graph = permutation_graph(n, sigma)
        for xi_lab, wt in sm.atoms:
            xi = {r: xi_lab[r - 1] for r in range(1, n + 1)}
            for f, c in graph.items():
                total += wt * float(c) * forest_integral(f, xi, s, t)
    return total


# ----------------------------------------------------------- skeleton integrals

def _zetas(node: DecoratedTree, xi: Mapping[int, float], out: dict) -> float:
    z = xi[node.decoration] + sum(_zetas(c, xi, out) for c in node.children)
    out[node.decoration] = z
    return z


def skeleton_value(forest: Forest, xi: Mapping[int, float], t: float, tol: float = 1e-13) -> complex:
    """Skeleton integral of a single unit-weight atom; multiplicative over trees."""
    out = 1 + 0j
    for tr in forest.trees:
        z: dict = {}
        total = _zetas(tr, xi, z)
        den = 1 + 0j
        scale = max(abs(xi[v]) for v in z)
        for v, zv in z.items():
            if abs(zv) <= tol * scale:
                raise DegenerateDenominator(f"partial frequency sum vanishes at vertex {v}")
            den *= 1j * zv
        out *= cmath.exp(1j * t * total) / den
    return out


def skeleton_integral(forest: Forest, measure: SectorMeasure, t: float) -> complex:
    labels = sorted(_labels(forest))
    total = 0j
    for xi_lab, wt in measure.atoms:
        total += wt * skeleton_value(forest, {r: xi_lab[r - 1] for r in labels}, t)
    return total


def _labels(forest: Forest) -> list[int]:
    out: list[int] = []

    def walk(t: DecoratedTree) -> None:
        out.append(t.decoration)
        for c in t.children:
            walk(c)

    for t in forest.trees:
        walk(t)
    return out


def skeleton_word(path: PathModel, word: Sequence[int], t: float) -> complex:
    """Skeleton integral of the trunk tree on the unsplit measure."""
    n = len(word)
    if n == 0:
        return 1 + 0j
    tr = trunk(n)
    return sum(wt * skeleton_value(tr, {r: xi[r - 1] for r in range(1, n + 1)}, t) for xi, wt, _ in path.atoms(word))


# ------------------------------------------------------------------ tree data

class TreeData:
    """A functional on heap-ordered forests, linear in the measure.

    ``value`` returns the contribution of a unit-weight atom whose label ``r``
    carries frequency ``xi[r]`` and letter ``letters[r]``.  Implementations
    must be multiplicative over trees, depend on a tree only through its shape
    and vertex data, and give ``exp(i t xi)/(i xi)`` on a single vertex.

    Separable data have the form ``coefficient * exp(i t sum xi)``; the
    character and rough-path sums then reduce to exponential sums whose
    coefficients are computed once per word.
    """

    name = "abstract"
    separable = False

    def tree_coefficient(self, tr: DecoratedTree, xi: Mapping[int, float], letters: Mapping[int, int]) -> complex:
        raise NotImplementedError

    def tree_value(self, tr: DecoratedTree, xi: Mapping[int, float], letters: Mapping[int, int], t: float) -> complex:
        total = sum(xi[r] for r in _labels(Forest([tr])))
        return self.tree_coefficient(tr, xi, letters) * cmath.exp(1j * t * total)

    def coefficient(self, forest: Forest, xi: Mapping[int, float], letters: Mapping[int, int]) -> complex:
        out = 1 + 0j
        for tr in forest.trees:
            out *= self.tree_coefficient(tr, xi, letters)
        return out

    def value(self, forest: Forest, xi: Mapping[int, float], letters: Mapping[int, int], t: float) -> complex:
        out = 1 + 0j
        for tr in forest.trees:
            out *= self.tree_value(tr, xi, letters, t)
        return out


class SkeletonData(TreeData):
    name = "skeleton"
    separable = True

    def tree_coefficient(self, tr, xi, letters):
        return skeleton_value(Forest([tr]), xi, 0.0)

    def __hash__(self):
        return hash("skeleton")

    def __eq__(self, other):
        return isinstance(other, SkeletonData)


def _relabel(tr: DecoratedTree, f) -> DecoratedTree:
    return DecoratedTree(f(tr.decoration), [_relabel(c, f) for c in tr.children])


class MockData(TreeData):
    """Arbitrary tree data: a hash-derived coefficient per decorated tree shape.

    Trees with two or more vertices get ``h(shape) * exp(i t sum xi)`` where
    ``h`` is a pseudo-random complex number determined by the seed and the
    canonical form of the tree decorated with (letter, frequency).  Single
    vertices are pinned to the path increment.
    """

    name = "mock"
    separable = True

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def tree_coefficient(self, tr, xi, letters):
        if not tr.children:
            return 1 / (1j * xi[tr.decoration])
        shape = _relabel(tr, lambda r: (letters[r], xi[r]))
        return _hash_coeff(self.seed, shape.canonical_key)

    def __hash__(self):
        return hash(("mock", self.seed))

    def __eq__(self, other):
        return isinstance(other, MockData) and other.seed == self.seed


@lru_cache(maxsize=1 << 18)
def _hash_coeff(seed: int, key) -> complex:
    h = hashlib.blake2b(repr((seed, key)).encode(), digest_size=16).digest()
    a = int.from_bytes(h[:8], "little") / 2**64 - 0.5
    b = int.from_bytes(h[8:], "little") / 2**64 - 0.5
    return complex(a, b)


# ------------------------------------------------------------ characters and J

@lru_cache(maxsize=None)
def _phi_structure(n: int, sigma: tuple) -> tuple:
    """Terms ``(c, R, L)`` with J = sum c * phi^t(R) * phi^s(L) for one sector."""
    acc = LinearCombination()
    for f, c in permutation_graph(n, sigma).items():
        for (roo, lea), c2 in coproduct(f).items():
            for sl, c3 in antipode(lea).items():
                acc._add((roo, sl), c * c2 * c3)
    return tuple((float(c), r, l) for (r, l), c in acc.items())


def _atom_maps(xi_lab: Sequence[float], letters: Sequence[int]) -> tuple[dict, dict]:
    return ({r: x for r, x in enumerate(xi_lab, 1)}, {r: a for r, a in enumerate(letters, 1)})


def chi(treedata: TreeData, path: PathModel, word: Sequence[int], t: float, ties: str = "split") -> complex:
    """One-time character: sum over sectors of the tree data on permutation graphs."""
    word = tuple(word)
    n = len(word)
    if n == 0:
        return 1 + 0j
    if treedata.separable:
        freqs, coeffs = _chi_spectrum(treedata, path, word, ties)
        return complex(np.sum(coeffs * np.exp(1j * t * freqs)))
    total = 0j
    for sigma, sm in split_measure(path, word, ties).items():
        graph = permutation_graph(n, sigma)
        for xi_lab, wt in sm.atoms:
            xi, letters = _atom_maps(xi_lab, sm.letters)
            for f, c in graph.items():
                total += wt * float(c) * treedata.value(f, xi, letters, t)
    return total


@lru_cache(maxsize=4096)
def _chi_spectrum(treedata: TreeData, path: PathModel, word: tuple, ties: str):
    n = len(word)
    freqs, coeffs = [], []
    for sigma, sm in split_measure(path, word, ties).items():
        graph = permutation_graph(n, sigma)
        for xi_lab, wt in sm.atoms:
            xi, letters = _atom_maps(xi_lab, sm.letters)
            acc = sum(float(c) * treedata.coefficient(f, xi, letters) for f, c in graph.items())
            freqs.append(sum(xi_lab))
            coeffs.append(wt * acc)
    return np.array(freqs), np.array(coeffs)


@lru_cache(maxsize=4096)
def _j_phi_spectrum(treedata: TreeData, path: PathModel, word: tuple, ties: str):
    n = len(word)
    f_t, f_s, coeffs = [], [], []
    for sigma, sm in split_measure(path, word, ties).items():
        terms = _phi_structure(n, sigma)
        for xi_lab, wt in sm.atoms:
            xi, letters = _atom_maps(xi_lab, sm.letters)
            for c, r, l in terms:
                f_t.append(sum(xi[v] for v in _labels(r)))
                f_s.append(sum(xi[v] for v in _labels(l)))
                coeffs.append(wt * c * treedata.coefficient(r, xi, letters) * treedata.coefficient(l, xi, letters))
    return np.array(f_t), np.array(f_s), np.array(coeffs)


@dataclass(frozen=True)
class RoughPathValue:
    word: tuple
    s: float
    t: float
    value: complex


def rough_path(treedata: TreeData, path: PathModel, word: Sequence[int], s: float, t: float,
               method: str = "chi", ties: str = "split") -> RoughPathValue:
    """Two-time rough path value.

    ``method="chi"`` convolves the characters on words, ``sum_k chi^t(w[:k])
    chi^s(S w[k:])``; ``method="phi"`` convolves the tree data on each
    permutation graph through the tree coproduct and antipode.
    """
    word = tuple(word)
    if method == "chi":
        val = _j_chi(treedata, path, word, s, t, ties)
    elif method == "phi":
        val = _j_phi(treedata, path, word, s, t, ties)
    else:
        raise ValueError(f"unknown method {method!r}")
    return RoughPathValue(word, s, t, val)


def _j_chi(treedata, path, word, s, t, ties):
    n = len(word)
    total = 0j
    for k in range(n + 1):
        tail = word[k:]
        total += chi(treedata, path, word[:k], t, ties) * (-1) ** len(tail) * chi(treedata, path, tail[::-1], s, ties)
    return total


def _j_phi(treedata, path, word, s, t, ties):
    n = len(word)
    if n == 0:
        return 1 + 0j
    if treedata.separable:
        f_t, f_s, coeffs = _j_phi_spectrum(treedata, path, word, ties)
        return complex(np.sum(coeffs * np.exp(1j * (t * f_t + s * f_s))))
    total = 0j
    for sigma, sm in split_measure(path, word, ties).items():
        terms = _phi_structure(n, sigma)
        for xi_lab, wt in sm.atoms:
            xi, letters = _atom_maps(xi_lab, sm.letters)
            acc = 0j
            for c, r, l in terms:
                acc += c * treedata.value(r, xi, letters, t) * treedata.value(l, xi, letters, s)
            total += wt * acc
    return total


class _JCache:
    def __init__(self, treedata, path, method="chi"):
        self.treedata, self.path, self.method = treedata, path, method
        self._chi: dict = {}
        self._j: dict = {}

    def chi(self, word, t):
        key = (word, t)
        if key not in self._chi:
            self._chi[key] = chi(self.treedata, self.path, word, t)
        return self._chi[key]

    def J(self, word, s, t):
        key = (word, s, t)
        if key not in self._j:
            if self.method == "phi":
                self._j[key] = _j_phi(self.treedata, self.path, word, s, t, "split")
            else:
                n = len(word)
                self._j[key] = sum(
                    self.chi(word[:k], t) * (-1) ** (n - k) * self.chi(word[k:][::-1], s) for k in range(n + 1)
                )
        return self._j[key]


def _scale(*vals: complex) -> float:
    return max(1.0, *(abs(v) for v in vals))


def verify_chen(treedata: TreeData, path: PathModel, words: Iterable[Sequence[int]],
                triples: Iterable[tuple[float, float, float]], method: str = "chi") -> dict:
    """Check ``J^{ts}(w) = sum_k J^{tu}(w[:k]) J^{us}(w[k:])``; reports the max relative residual."""
    cache = _JCache(treedata, path, method)
    worst, count = 0.0, 0
    for s, u, t in triples:
        for w in words:
            w = tuple(w)
            lhs = cache.J(w, s, t)
            rhs = sum(cache.J(w[:k], u, t) * cache.J(w[k:], s, u) for k in range(len(w) + 1))
            worst = max(worst, abs(lhs - rhs) / _scale(lhs, rhs))
            count += 1
    return {"property": "chen", "checks": count, "max_residual": worst}


def verify_shuffle(treedata: TreeData, path: PathModel, pairs: Iterable[tuple[Sequence[int], Sequence[int]]],
                   times: Iterable[tuple[float, float]], method: str = "chi") -> dict:
    """Check ``J(u) J(v) = J(u sh v)``; reports the max relative residual."""
    cache = _JCache(treedata, path, method)
    worst, count = 0.0, 0
    for s, t in times:
        for u, v in pairs:
            u, v = tuple(u), tuple(v)
            lhs = cache.J(u, s, t) * cache.J(v, s, t)
            rhs = sum(float(c) * cache.J(w, s, t) for w, c in shuffle_product(u, v).items())
            worst = max(worst, abs(lhs - rhs) / _scale(lhs, rhs))
            count += 1
    return {"property": "shuffle", "checks": count, "max_residual": worst}


def word_pairs(max_total: int, d: int = 2) -> list[tuple[tuple, tuple]]:
    from .hopf_trees import all_words

    out = []
    for a in range(1, max_total):
        for b in range(1, max_total - a + 1):
            for u in all_words(a, d):
                for v in all_words(b, d):
                    out.append((u, v))
    return out


def default_path(d: int = 2) -> PathModel:
    """Generic positive-frequency two-mode path used by tests and the CLI."""
    base = [((1.0, 0.7 + 0.2j), (2.37, -0.4 + 0.5j)), ((1.61, 0.3 - 0.6j), (3.13, 0.5 + 0.1j))]
    extra = [((0.53 + 0.91 * k, 0.2 + 0.1j * k), (4.07 + 1.3 * k, 0.3 - 0.2j)) for k in range(max(0, d - 2))]
    return PathModel(tuple(base[:d] + extra))
