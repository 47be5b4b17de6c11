"""Hopf algebra of decorated rooted trees, the shuffle Hopf algebra, and the
projection morphism from trees to words.

Trees are unordered; a tree is stored in canonical form with children sorted
by their canonical key, so equality of keys is isomorphism.  Forests are
sorted tuples of trees; the empty forest is the unit.  All coefficients are
exact rationals.
"""

from __future__ import annotations

import json
from functools import lru_cache
from itertools import combinations
from typing import Any, Iterable, Iterator, Sequence

from .algebra import LinearCombination

Word = tuple  # tuple of int letters


class DecoratedTree:
    """Rooted tree whose vertices carry a decoration (letter or integer label)."""

    __slots__ = ("decoration", "children", "_key", "_size")

    def __init__(self, decoration: int, children: Iterable["DecoratedTree"] = ()):
        kids = tuple(sorted(children, key=lambda c: c._key))
        self.decoration = decoration
        self.children = kids
        self._key = (decoration, tuple(c._key for c in kids))
        self._size = 1 + sum(c._size for c in kids)

    @property
    def canonical_key(self) -> tuple:
        return self._key

    def __len__(self) -> int:
        return self._size

    def __eq__(self, other) -> bool:
        return isinstance(other, DecoratedTree) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __lt__(self, other: "DecoratedTree") -> bool:
        return self._key < other._key

    def __repr__(self) -> str:
        if not self.children:
            return f"[{self.decoration}]"
        return f"[{self.decoration} " + " ".join(map(repr, self.children)) + "]"

    # vertex-level view: ids 1..n in preorder
    def _preorder(self) -> list[tuple["DecoratedTree", int | None]]:
        out: list[tuple[DecoratedTree, int | None]] = []

        def walk(t: DecoratedTree, parent: int | None) -> None:
            out.append((t, parent))
            me = len(out)
            for c in t.children:
                walk(c, me)

        walk(self, None)
        return out

    @property
    def vertices(self) -> list[int]:
        return list(range(1, self._size + 1))

    @property
    def parent(self) -> dict[int, int]:
        return {i: p for i, (_, p) in enumerate(self._preorder(), 1) if p is not None}

    @property
    def decorations(self) -> dict[int, int]:
        return {i: t.decoration for i, (t, _) in enumerate(self._preorder(), 1)}

    @classmethod
    def from_parent_map(cls, parent: dict, decoration: dict) -> "DecoratedTree":
        """Build from an arbitrary vertex labelling; the result is canonical."""
        verts = set(decoration)
        roots = [v for v in verts if v not in parent]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {len(roots)}")
        kids: dict[Any, list] = {v: [] for v in verts}
        for v, p in parent.items():
            if p not in kids:
                raise ValueError(f"parent {p!r} of {v!r} is not a vertex")
            kids[p].append(v)

        seen: set = set()

        def build(v) -> DecoratedTree:
            if v in seen:
                raise ValueError("parent map has a cycle")
            seen.add(v)
            return cls(decoration[v], [build(c) for c in kids[v]])

        t = build(roots[0])
        if len(seen) != len(verts):
            raise ValueError("parent map has a cycle or disconnected vertices")
        return t


def tree(decoration: int, *children: DecoratedTree) -> DecoratedTree:
    return DecoratedTree(decoration, children)


def ladder(*decorations: int) -> DecoratedTree:
    """Trunk tree decorated from the root to the top."""
    t = None
    for d in reversed(decorations):
        t = DecoratedTree(d, [] if t is None else [t])
    if t is None:
        raise ValueError("ladder needs at least one vertex")
    return t


class Forest:
    """Commutative product of trees; the empty forest is the unit 1."""

    __slots__ = ("trees",)

    def __init__(self, trees: Iterable[DecoratedTree] = ()):
        self.trees = tuple(sorted(trees, key=lambda t: t._key))

    def __mul__(self, other: "Forest") -> "Forest":
        return Forest(self.trees + other.trees)

    def __len__(self) -> int:
        return sum(len(t) for t in self.trees)

    def __eq__(self, other) -> bool:
        return isinstance(other, Forest) and self.trees == other.trees

    def __hash__(self) -> int:
        return hash(self.trees)

    def __lt__(self, other: "Forest") -> bool:
        return [t._key for t in self.trees] < [t._key for t in other.trees]

    def __repr__(self) -> str:
        return "1" if not self.trees else "".join(map(repr, self.trees))


UNIT = Forest()


def as_forest(x) -> Forest:
    if isinstance(x, Forest):
        return x
    if isinstance(x, DecoratedTree):
        return Forest([x])
    return Forest(x)


# ---------------------------------------------------------------- cuts

def _ancestors(parent: dict[int, int], v: int) -> set[int]:
    out = set()
    while v in parent:
        v = parent[v]
        out.add(v)
    return out


def admissible_cuts(t: DecoratedTree) -> list[frozenset[int]]:
    """All antichains of vertex ids (preorder numbering), including the empty cut."""
    pre = t._preorder()
    kids: dict[int, list[int]] = {i: [] for i in range(1, len(pre) + 1)}
    for i, (_, p) in enumerate(pre, 1):
        if p is not None:
            kids[p].append(i)

    def rec(v: int) -> list[frozenset[int]]:
        combos = [frozenset()]
        for c in kids[v]:
            combos = [a | b for a in combos for b in rec(c)]
        return combos + [frozenset([v])]

    return rec(1)


def is_antichain(t: DecoratedTree, cut: Iterable[int]) -> bool:
    parent = t.parent
    cut = set(cut)
    return all(not (_ancestors(parent, v) & cut) for v in cut)


def roo_lea(t: DecoratedTree, cut: Iterable[int]) -> tuple[Forest, Forest]:
    """Split ``t`` along an admissible cut.

    The leaf part collects the subtrees rooted at cut vertices; the root part is
    what remains.
    """
    cut = set(cut)
    pre = t._preorder()
    kids: dict[int, list[int]] = {i: [] for i in range(1, len(pre) + 1)}
    for i, (_, p) in enumerate(pre, 1):
        if p is not None:
            kids[p].append(i)
    dec = {i: s.decoration for i, (s, _) in enumerate(pre, 1)}

    def sub(v: int) -> DecoratedTree:
        return DecoratedTree(dec[v], [sub(c) for c in kids[v]])

    lea: list[DecoratedTree] = []

    def keep(v: int) -> DecoratedTree | None:
        if v in cut:
            lea.append(sub(v))
            return None
        ch = [keep(c) for c in kids[v]]
        return DecoratedTree(dec[v], [c for c in ch if c is not None])

    root = keep(1)
    return (UNIT if root is None else Forest([root])), Forest(lea)


@lru_cache(maxsize=None)
def _cut_pairs(t: DecoratedTree) -> tuple[tuple[DecoratedTree | None, tuple[DecoratedTree, ...]], ...]:
    # (root part or None, leaf trees) for every admissible cut, with multiplicity
    combos: list[tuple[list[DecoratedTree], tuple[DecoratedTree, ...]]] = [([], ())]
    for c in t.children:
        nxt = []
        for kept, lea in combos:
            for r, l in _cut_pairs(c):
                nxt.append((kept + ([r] if r is not None else []), lea + l))
        combos = nxt
    out = [(DecoratedTree(t.decoration, kept), lea) for kept, lea in combos]
    out.append((None, (t,)))
    return tuple(out)


@lru_cache(maxsize=None)
def _tree_coproduct(t: DecoratedTree) -> LinearCombination:
    out = LinearCombination()
    for r, lea in _cut_pairs(t):
        out._add((UNIT if r is None else Forest([r]), Forest(lea)), 1)
    return out


def coproduct(x) -> LinearCombination:
    """Coproduct of a tree or forest, as a combination of (root part, leaf part)."""
    f = as_forest(x)
    out = LinearCombination.basis((UNIT, UNIT))
    for t in f.trees:
        out = out.bilinear(_tree_coproduct(t), lambda a, b: LinearCombination.basis((a[0] * b[0], a[1] * b[1])))
    return out


def coproduct_lc(x: LinearCombination) -> LinearCombination:
    return x.map(coproduct)


def counit(f: Forest) -> int:
    return 1 if f == UNIT else 0


@lru_cache(maxsize=None)
def _tree_antipode(t: DecoratedTree) -> LinearCombination:
    out = LinearCombination.basis(Forest([t]), -1)
    for r, lea in _cut_pairs(t):
        if r is None or not lea:
            continue  # the trivial cuts T (x) 1 and 1 (x) T
        s_lea = antipode(Forest(lea))
        for f, c in s_lea.items():
            out._add(Forest([r]) * f, -c)
    return out


def antipode(x) -> LinearCombination:
    """Antipode, defined inductively on trees and extended multiplicatively."""
    f = as_forest(x)
    out = LinearCombination.basis(UNIT)
    for t in f.trees:
        out = out.bilinear(_tree_antipode(t), lambda a, b: LinearCombination.basis(a * b))
    return out


def forest_product(x: LinearCombination, y: LinearCombination) -> LinearCombination:
    return x.bilinear(y, lambda a, b: LinearCombination.basis(a * b))


# --------------------------------------------------------------- words

def shuffle_product(u: Sequence[int], v: Sequence[int]) -> LinearCombination:
    return LinearCombination((w, c) for w, c in _shuffle(tuple(u), tuple(v)).items())


@lru_cache(maxsize=None)
def _shuffle(u: Word, v: Word) -> dict:
    if not u:
        return {v: 1}
    if not v:
        return {u: 1}
    out: dict = {}
    for w, c in _shuffle(u[1:], v).items():
        k = (u[0],) + w
        out[k] = out.get(k, 0) + c
    for w, c in _shuffle(u, v[1:]).items():
        k = (v[0],) + w
        out[k] = out.get(k, 0) + c
    return out


def shuffle_lc(x: LinearCombination, y: LinearCombination) -> LinearCombination:
    return x.bilinear(y, shuffle_product)


def word_coproduct(w: Sequence[int]) -> LinearCombination:
    """Deconcatenation."""
    w = tuple(w)
    return LinearCombination(((w[:k], w[k:]), 1) for k in range(len(w) + 1))


def word_antipode(w: Sequence[int]) -> LinearCombination:
    w = tuple(w)
    return LinearCombination.basis(w[::-1], (-1) ** len(w))


def word_counit(w: Word) -> int:
    return 1 if len(w) == 0 else 0


# --------------------------------------------------------------- theta

@lru_cache(maxsize=None)
def _theta_tree(t: DecoratedTree) -> LinearCombination:
    rest = LinearCombination.basis(())
    for c in t.children:
        rest = shuffle_lc(rest, _theta_tree(c))
    return LinearCombination(((t.decoration,) + w, c) for w, c in rest.items())


def theta(x) -> LinearCombination:
    """Sum of the linear extensions of the ancestry order, read root to top."""
    if isinstance(x, LinearCombination):
        return x.map(theta)
    f = as_forest(x)
    out = LinearCombination.basis(())
    for t in f.trees:
        out = shuffle_lc(out, _theta_tree(t))
    return out


def linear_extensions(t: DecoratedTree) -> list[Word]:
    """Brute-force oracle: permutations of the vertices compatible with ancestry."""
    from itertools import permutations

    parent = t.parent
    dec = t.decorations
    out = []
    for perm in permutations(t.vertices):
        pos = {v: i for i, v in enumerate(perm)}
        if all(pos[p] < pos[v] for v, p in parent.items()):
            out.append(tuple(dec[v] for v in perm))
    return out


# --------------------------------------------------------- enumeration

@lru_cache(maxsize=None)
def all_trees(n: int, d: int = 2) -> tuple[DecoratedTree, ...]:
    """All decorated trees with exactly ``n`` vertices, letters 1..d."""
    if n == 1:
        return tuple(DecoratedTree(a) for a in range(1, d + 1))
    out = set()
    for a in range(1, d + 1):
        for f in all_forests(n - 1, d):
            out.add(DecoratedTree(a, f.trees))
    return tuple(sorted(out, key=lambda t: t._key))


@lru_cache(maxsize=None)
def all_forests(n: int, d: int = 2) -> tuple[Forest, ...]:
    """All forests with exactly ``n`` vertices."""
    if n == 0:
        return (UNIT,)
    out = set()
    for k in range(1, n + 1):
        for t in all_trees(k, d):
            for f in all_forests(n - k, d):
                out.add(Forest((t,) + f.trees))
    return tuple(sorted(out))


def all_words(n: int, d: int = 2) -> list[Word]:
    from itertools import product

    return [tuple(w) for w in product(range(1, d + 1), repeat=n)]


# --------------------------------------------------------- serialization

def tree_to_json(t: DecoratedTree) -> dict:
    counter = iter(range(1, len(t) + 1))

    def enc(s: DecoratedTree) -> dict:
        return {"root": next(counter), "decoration": s.decoration, "children": [enc(c) for c in s.children]}

    return enc(t)


def tree_from_json(obj: dict) -> DecoratedTree:
    if not isinstance(obj, dict) or "decoration" not in obj:
        raise ValueError("tree JSON needs a 'decoration' field")
    return DecoratedTree(int(obj["decoration"]), [tree_from_json(c) for c in obj.get("children", [])])


def forest_to_json(f: Forest) -> list:
    return [tree_to_json(t) for t in f.trees]


def forest_from_json(obj) -> Forest:
    if isinstance(obj, dict):
        return Forest([tree_from_json(obj)])
    return Forest(tree_from_json(o) for o in obj)


def lc_to_json(x: LinearCombination) -> list:
    """Terms as ``{"coeff": "p/q", "term": ...}`` with forests, words or pairs encoded."""

    def enc(b):
        if isinstance(b, Forest):
            return forest_to_json(b)
        if isinstance(b, DecoratedTree):
            return tree_to_json(b)
        if isinstance(b, tuple) and len(b) == 2 and all(isinstance(e, (Forest, tuple)) for e in b) and any(
            isinstance(e, Forest) for e in b
        ):
            return [enc(b[0]), enc(b[1])]
        if isinstance(b, tuple) and b and isinstance(b[0], tuple):
            return [list(e) for e in b]
        return list(b)

    items = sorted(x.items(), key=lambda kv: repr(kv[0]))
    return [{"coeff": str(c), "term": enc(b)} for b, c in items]


def tree_to_dot(t: DecoratedTree, name: str = "tree") -> str:
    lines = [f"digraph {name} {{", "  rankdir=BT;"]
    for i, dec in t.decorations.items():
        lines.append(f'  v{i} [label="{dec}"];')
    for v, p in t.parent.items():
        lines.append(f"  v{v} -> v{p};")
    lines.append("}")
    return "\n".join(lines)


def parse_word(s: str) -> Word:
    s = s.strip()
    if not s:
        return ()
    if "," in s or " " in s:
        return tuple(int(x) for x in s.replace(",", " ").split())
    return tuple(int(ch) for ch in s)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
