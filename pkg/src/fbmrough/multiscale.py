"""Scale attributions, Gallavotti-Nicolo trees and dangerous forests.

A scale attribution gives every line (external ones included) an integer
scale ``j``, meaning ``|momentum|`` lies in ``[M^j, M^(j+1))``.  The local
subgraphs are the connected components of the lines of scale ``>= j``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import AlphaRangeError
from .feynman import (
    ALPHA,
    AmplitudeExpression,
    DivergenceDegree,
    HalfDiagram,
    Subgraph,
    _components,
    bphz_renormalize,
    compatible,
    enumerate_forests,
)


@dataclass(frozen=True)
class ScaleAttribution:
    scales: Mapping[str, int]
    M: float = 2.0

    def __post_init__(self):
        if self.M <= 1:
            raise ValueError("M must exceed 1")
        object.__setattr__(self, "scales", dict(self.scales))

    def __getitem__(self, line: str) -> int:
        return self.scales[line]

    def check(self, h: HalfDiagram) -> None:
        missing = [n for n in h.lines if n not in self.scales]
        if missing:
            raise ValueError(f"no scale for lines {missing}")

    def window(self, line: str) -> tuple[float, float]:
        j = self.scales[line]
        return self.M ** j, self.M ** (j + 1)

    @classmethod
    def from_momenta(cls, values: Mapping[str, float], M: float = 2.0) -> "ScaleAttribution":
        return cls({n: math.floor(math.log(abs(v), M)) for n, v in values.items()}, M)


def _line_components(h: HalfDiagram, lines: Iterable[str]) -> list[frozenset]:
    """Connected components of a line set, as line sets."""
    lines = list(lines)
    adj: dict = {}
    for n in lines:
        ends = h.lines[n].ends
        for v in ends:
            adj.setdefault(v, set())
        if len(ends) == 2:
            adj[ends[0]].add(ends[1])
            adj[ends[1]].add(ends[0])
    out = []
    for comp in _components(adj):
        out.append(frozenset(n for n in lines if h.lines[n].ends[0] in comp))
    return out


def local_components(h: HalfDiagram, mu: ScaleAttribution, j: int) -> list[Subgraph]:
    """Components of the lines of scale >= j, root-leg-only pieces dropped."""
    high = [n for n in h.lines if mu[n] >= j]
    out = []
    for comp in _line_components(h, high):
        if all(h.lines[n].kind == "root" for n in comp):
            continue
        out.append(Subgraph(comp, frozenset(v for n in comp for v in h.lines[n].ends)))
    return sorted(out)


@dataclass
class GNNode:
    subgraph: Subgraph
    scales: list            # every j at which this line set is a component
    parent: int | None = None

    @property
    def scale(self) -> int:
        return max(self.scales)


@dataclass
class GNTree:
    diagram: HalfDiagram
    mu: ScaleAttribution
    nodes: list

    def subgraphs(self) -> list[Subgraph]:
        return [n.subgraph for n in self.nodes]

    def chain(self) -> list[Subgraph]:
        """Nodes ordered by decreasing top scale."""
        return [n.subgraph for n in sorted(self.nodes, key=lambda n: -n.scale)]

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"lines": sorted(n.subgraph.lines), "scales": n.scales, "parent": n.parent}
                for n in self.nodes
            ]
        }

    def to_dot(self) -> str:
        out = ["digraph GN {", "  node [shape=box];"]
        for k, n in enumerate(self.nodes):
            out.append(f'  n{k} [label="j={n.scale}\\n{n.subgraph.name}"];')
        for k, n in enumerate(self.nodes):
            if n.parent is not None:
                out.append(f"  n{n.parent} -> n{k};")
        out.append("}")
        return "\n".join(out) + "\n"


def gn_tree(h: HalfDiagram, mu: ScaleAttribution) -> GNTree:
    mu.check(h)
    by_lines: dict[frozenset, GNNode] = {}
    for j in sorted(set(mu.scales[n] for n in h.lines)):
        for g in local_components(h, mu, j):
            node = by_lines.get(g.lines)
            if node is None:
                by_lines[g.lines] = GNNode(g, [j])
            else:
                node.scales.append(j)
    nodes = sorted(by_lines.values(), key=lambda n: (-len(n.subgraph.lines), n.subgraph.name))
    for k, n in enumerate(nodes):
        cands = [i for i, m in enumerate(nodes)
                 if i != k and n.subgraph.lines < m.subgraph.lines]
        if cands:
            n.parent = min(cands, key=lambda i: len(nodes[i].subgraph.lines))
    return GNTree(h, mu, nodes)


def omega_star_by_scale(h: HalfDiagram, mu: ScaleAttribution) -> dict[int, DivergenceDegree]:
    """Sum of omega* over the components of the lines of scale >= j, for each occurring j."""
    out = {}
    for j in sorted(set(mu.scales[n] for n in h.lines), reverse=True):
        out[j] = sum((h.omega_star(g) for g in local_components(h, mu, j)), DivergenceDegree())
    return out


def local_subgraphs(h: HalfDiagram, mu: ScaleAttribution) -> list[Subgraph]:
    """Divergent non-total GN nodes with at least two vertices (the useful subtractions)."""
    return [g for g in gn_tree(h, mu).subgraphs()
            if h.is_divergent(g) and not h.is_total(g) and len(g.vertices) >= 2]


def useful_renormalize(h: HalfDiagram, mu: ScaleAttribution,
                       basis: Sequence[str] | None = None) -> AmplitudeExpression:
    """Subtract only the local divergent subgraphs of ``mu``."""
    return bphz_renormalize(h, local_subgraphs(h, mu), basis)


# ------------------------------------------------------------ dangerous forests

@dataclass
class ForestClassification:
    forest: tuple
    dangerous: tuple
    harmless: tuple
    extension: tuple
    safe: bool

    def to_json(self) -> dict:
        names = lambda gs: [g.name for g in gs]
        return {
            "forest": names(self.forest),
            "dangerous": names(self.dangerous),
            "harmless": names(self.harmless),
            "extension": names(self.extension),
            "safe": self.safe,
        }


def _is_dangerous(h: HalfDiagram, g: Subgraph, forest: Sequence[Subgraph], mu: ScaleAttribution) -> bool:
    inner = [f for f in forest if f.lines < g.lines]
    up = set().union(*(f.lines for f in inner)) if inner else set()
    outer = [f for f in forest if g.lines < f.lines]
    minus = min(outer, key=lambda f: len(f.lines)).lines if outer else frozenset(h.lines)
    own = [mu[n] for n in g.lines - up]
    ext = [mu[n] for n in h.external_lines(g) if n in minus]
    return min(own) > (max(ext) if ext else -math.inf)


def dangerous(h: HalfDiagram, forest: Sequence[Subgraph], mu: ScaleAttribution) -> tuple:
    return tuple(g for g in sorted(forest) if _is_dangerous(h, g, forest, mu))


def harmless(h: HalfDiagram, forest: Sequence[Subgraph], mu: ScaleAttribution) -> tuple:
    d = set(dangerous(h, forest, mu))
    return tuple(g for g in sorted(forest) if g not in d)


def extension(h: HalfDiagram, forest: Sequence[Subgraph], mu: ScaleAttribution,
              universe: Sequence[Subgraph]) -> tuple:
    """Subgraphs compatible with ``forest`` that are dangerous once added to it."""
    fs = set(forest)
    out = []
    for g in universe:
        if g in fs or not all(compatible(g, f) for f in forest):
            continue
        if _is_dangerous(h, g, list(forest) + [g], mu):
            out.append(g)
    return tuple(sorted(out))


def classify_forest(h: HalfDiagram, forest: Sequence[Subgraph], mu: ScaleAttribution,
                    universe: Sequence[Subgraph] | None = None) -> ForestClassification:
    if universe is None:
        universe = h.divergent_line_subgraphs()
    forest = tuple(sorted(forest))
    d = dangerous(h, forest, mu)
    nd = tuple(g for g in forest if g not in d)
    ext = extension(h, forest, mu, universe)
    return ForestClassification(forest, d, nd, ext, not d)


def check_forest_classification(h: HalfDiagram, mu: ScaleAttribution,
                                universe: Sequence[Subgraph] | None = None,
                                limit: int | None = 50000) -> dict:
    """Exhaustively test idempotence of ND and the interval structure of its fibres."""
    if universe is None:
        universe = h.divergent_line_subgraphs()
    forests = enumerate_forests(universe, limit=limit)
    fibres: dict[frozenset, set] = {}
    idempotent = True
    for F in forests:
        nd = harmless(h, F, mu)
        if set(harmless(h, nd, mu)) != set(nd):
            idempotent = False
        fibres.setdefault(frozenset(nd), set()).add(frozenset(F))
    interval = True
    compatible_ext = True
    for F in forests:
        if dangerous(h, F, mu):
            continue
        ext = extension(h, F, mu, universe)
        if not all(compatible(a, b) for a in ext for b in ext):
            compatible_ext = False
            interval = False
            continue
        expected = set()
        for k in range(1 << len(ext)):
            expected.add(frozenset(F) | frozenset(e for i, e in enumerate(ext) if k >> i & 1))
        if fibres.get(frozenset(F), set()) != expected:
            interval = False
    gn = {g for g in gn_tree(h, mu).subgraphs() if h.is_divergent(g) and not h.is_total(g)}
    ext0 = set(extension(h, (), mu, universe))
    return {
        "forests": len(forests),
        "subgraphs": len(universe),
        "idempotent": idempotent,
        "interval": interval,
        "extension_is_forest": compatible_ext,
        "ext_empty_is_gn": ext0 == gn,
    }


# ------------------------------------------------------------ predictions

@dataclass
class BoundPrediction:
    exponent: DivergenceDegree
    alpha: float
    alpha_minus: float
    n: int
    n_prime: int
    omega_star_gr: dict = field(default_factory=dict)

    @property
    def exponent_value(self) -> float:
        return self.exponent(self.alpha)

    def evaluate(self, zeta_first: float, zeta_last: float, j_ref: int, M: float = 2.0) -> float:
        """``M^(exponent j_ref) (min(|z_1|, M^j_ref) / max(|z_q|, M^j_ref))^alpha_minus``."""
        ref = M ** j_ref
        spring = min(abs(zeta_first), ref) / max(abs(zeta_last), ref)
        return ref ** self.exponent_value * spring ** self.alpha_minus

    def to_json(self) -> dict:
        return {
            "exponent": self.exponent.to_json(),
            "exponent_value": self.exponent_value,
            "alpha": self.alpha,
            "alpha_minus": self.alpha_minus,
            "n": self.n,
            "n_prime": self.n_prime,
            "omega_star_gr": {str(j): w.to_json() for j, w in self.omega_star_gr.items()},
        }


def check_alpha(alpha: float, n: int) -> None:
    if not 0 < alpha < 1:
        raise AlphaRangeError(f"alpha={alpha} must lie in (0, 1)")
    inv = 1 / alpha
    if abs(inv - round(inv)) < 1e-12:
        raise AlphaRangeError(f"1/alpha={inv:g} is an integer")
    if 2 * n >= 2 / alpha:
        raise AlphaRangeError(f"2n={2 * n} must be below 2/alpha={2 / alpha:g}")


def highest_bridge(h: HalfDiagram, mu: ScaleAttribution) -> str | None:
    legs = h.legs
    return max(legs, key=lambda n: (mu[n], n)) if legs else None


def predict_bound(h: HalfDiagram, n: int, n_prime: int, alpha: float, alpha_minus: float,
                  mu: ScaleAttribution | None = None, xi1: str | None = None) -> BoundPrediction:
    check_alpha(alpha, n)
    if not 0 <= alpha_minus < alpha:
        raise AlphaRangeError("alpha_minus must lie in [0, alpha)")
    exponent = 1 - 2 * (n + n_prime) * ALPHA
    gr = {}
    if mu is not None:
        ref = xi1 or highest_bridge(h, mu)
        jref = mu[ref] if ref is not None else math.inf
        for j, w in omega_star_by_scale(h, mu).items():
            gr[j] = w - (2 * n_prime * ALPHA if j <= jref else 0)
    return BoundPrediction(exponent, alpha, alpha_minus, n, n_prime, gr)


def power_counting_violations(h: HalfDiagram, alpha_max: float) -> list[tuple]:
    """Connected subgraphs (>= 2 vertices, not total) breaking the omega* bounds on (0, alpha_max]."""
    bad = []
    subs = set(h.divergent_line_subgraphs())
    for s in h.connected_vertex_sets(2):
        subs.add(h.vertex_subgraph(s))
    for g in subs:
        if len(g.vertices) < 2 or h.is_total(g):
            continue
        w = h.omega_star(g, is_total=False)
        bound = -1 - 2 * ALPHA if h.is_bilateral(g) else -ALPHA
        if not w.le_on(bound, 0, alpha_max):
            bad.append((g, w, bound))
    return bad


# ------------------------------------------------------------ fixtures

EXAMPLE_SCALES = {
    1: {"zeta3": 4, "xi3": 4, "xi2": 4, "zeta4": 3, "xi4": 3, "xi1": 3, "zeta2": 2, "zeta1": 1},
    2: {"zeta1": 4, "zeta4": 4, "xi4": 4, "zeta3": 3, "xi3": 3, "xi2": 3, "xi1": 2, "zeta2": 1},
}

EXAMPLE_BASIS = {
    1: ("zeta1", "zeta2", "zeta3", "zeta4"),
    2: ("zeta1", "xi1", "zeta2", "zeta3"),
}


def example_attribution(which: int, M: float = 2.0) -> tuple[HalfDiagram, ScaleAttribution]:
    from .feynman import example_diagram

    return example_diagram(), ScaleAttribution(EXAMPLE_SCALES[which], M)


def random_diagram(rng: random.Random, max_vertices: int = 8, p_root: float = 0.15,
                   p_contract: float = 0.5, n: int | None = None) -> HalfDiagram:
    """Random heap-ordered forest with random disjoint contractions."""
    if n is None:
        n = rng.randint(2, max_vertices)
    parents = {1: None}
    for v in range(2, n + 1):
        parents[v] = None if rng.random() < p_root else rng.randint(1, v - 1)
    free = list(range(1, n + 1))
    rng.shuffle(free)
    pairs = []
    while len(free) >= 2 and rng.random() < p_contract:
        pairs.append((free.pop(), free.pop()))
    return HalfDiagram(parents, [tuple(sorted(p)) for p in pairs])


def random_attribution(h: HalfDiagram, rng: random.Random, top: int = 4, M: float = 2.0) -> ScaleAttribution:
    return ScaleAttribution({n: rng.randint(0, top) for n in h.lines}, M)


def checkable_diagrams(count: int, seed: int = 0, max_vertices: int = 8, limit: int = 30000,
                       attempts: int = 200) -> list[tuple[HalfDiagram, ScaleAttribution]]:
    """Random (diagram, attribution) pairs whose forest count stays below ``limit``.

    Sizes are drawn uniformly in ``[2, max_vertices]``; a size whose samples
    all exceed the limit falls back to the next smaller one.
    """
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(2, max_vertices)
        while n >= 2:
            for _ in range(attempts):
                h = random_diagram(rng, p_root=0.3, p_contract=0.9, n=n)
                try:
                    enumerate_forests(h.divergent_line_subgraphs(), limit=limit)
                except OverflowError:
                    continue
                out.append((h, random_attribution(h, rng)))
                break
            else:
                n -= 1
                continue
            break
    return out
