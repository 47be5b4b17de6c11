"""Tree Feynman half-diagrams, symbolic amplitudes, power counting and BPHZ.

A half-diagram is built from a forest (parent map) and a set of contraction
pairs.  Lines are named by strings:

* ``zeta<v>``   simple line from ``v`` down to its parent, or the external
  root leg when ``v`` is a root;
* ``xi<v>``     uncontracted phi-leg of ``v`` (a bridge once mirrored);
* ``xi(<i>,<j>)`` contracted double line, with ``xi_i = xi_(ij) = -xi_j``.

Momentum conservation at ``v`` reads ``zeta_v = xi_v + sum_children zeta_c``.
Simple external lines at the leaves carry zero momentum and are omitted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import LinearCombination
from .errors import InvalidContraction
from .hopf_trees import DecoratedTree, Forest

Form = LinearCombination  # linear form over momentum variables


# ------------------------------------------------------------ exponents

@dataclass(frozen=True, order=True)
class DivergenceDegree:
    """Affine form ``a + b*alpha`` with exact rational coefficients."""

    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))

    def __add__(self, other: "DivergenceDegree") -> "DivergenceDegree":
        other = as_degree(other)
        return DivergenceDegree(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __neg__(self) -> "DivergenceDegree":
        return DivergenceDegree(-self.a, -self.b)

    def __sub__(self, other) -> "DivergenceDegree":
        return self + (-as_degree(other))

    def __rsub__(self, other) -> "DivergenceDegree":
        return as_degree(other) + (-self)

    def __mul__(self, k) -> "DivergenceDegree":
        return DivergenceDegree(self.a * Fraction(k), self.b * Fraction(k))

    __rmul__ = __mul__

    def __call__(self, alpha: float) -> float:
        return float(self.a) + float(self.b) * alpha

    def le_on(self, other, lo: float, hi: float) -> bool:
        """``self <= other`` for every alpha in ``[lo, hi]`` (affine, so endpoints suffice)."""
        d = as_degree(other) - self
        lo, hi = Fraction(lo), Fraction(hi)
        return d.a + d.b * lo >= 0 and d.a + d.b * hi >= 0

    def __str__(self) -> str:
        if self.b == 0:
            return str(self.a)
        coef = {1: "", -1: "-"}.get(self.b, str(self.b))
        term = f"{coef}α"
        if self.a == 0:
            return term
        return f"{self.a}{term}" if term.startswith("-") else f"{self.a}+{term}"

    def to_json(self) -> dict:
        return {"a": str(self.a), "b": str(self.b), "text": str(self)}


def as_degree(x) -> DivergenceDegree:
    if isinstance(x, DivergenceDegree):
        return x
    return DivergenceDegree(Fraction(x), Fraction(0))


ALPHA = DivergenceDegree(0, 1)
LEG_EXPONENT = DivergenceDegree(Fraction(1, 2), -1)   # |xi|^(1/2 - alpha)
DOUBLE_EXPONENT = DivergenceDegree(1, -2)             # |xi|^(1 - 2 alpha)


# ------------------------------------------------------------ linear algebra

def _rref(rows: list[dict], order: Sequence[str]) -> tuple[list[dict], list[str]]:
    """Exact reduced row echelon form of sparse rows, pivoting along ``order``."""
    rows = [dict(r) for r in rows if r]
    pivots: list[str] = []
    out: list[dict] = []
    for var in order:
        k = next((i for i, r in enumerate(rows) if r.get(var, 0) != 0), None)
        if k is None:
            continue
        piv = rows.pop(k)
        c = piv[var]
        piv = {v: x / c for v, x in piv.items() if x != 0}
        for r in rows + out:
            f = r.get(var, 0)
            if f:
                for v, x in piv.items():
                    y = r.get(v, 0) - f * x
                    if y:
                        r[v] = y
                    else:
                        r.pop(v, None)
        out.append(piv)
        pivots.append(var)
    return out, pivots


def _decompose(target: Form, basis: Sequence[Form]) -> list[Fraction] | None:
    """Coefficients of ``target`` in ``basis`` (assumed independent), or None."""
    names = [f"#{k}" for k in range(len(basis))]
    vars_ = sorted({v for b in basis for v in b} | set(target), key=str)
    rows = []
    for v in vars_:
        r = {names[k]: b[v] for k, b in enumerate(basis) if b[v] != 0}
        if target[v] != 0:
            r["rhs"] = target[v]
        if r:
            rows.append(r)
    red, piv = _rref(rows, names + ["rhs"])
    if "rhs" in piv:
        return None
    coef = [Fraction(0)] * len(basis)
    for r, p in zip(red, piv):
        coef[names.index(p)] = r.get("rhs", Fraction(0))
    return coef


def _independent(forms: Sequence[Form]) -> bool:
    vars_ = sorted({v for f in forms for v in f}, key=str)
    rows = [{k: f[v] for k, f in enumerate(forms) if f[v] != 0} for v in vars_]
    _, piv = _rref(rows, list(range(len(forms))))
    return len(piv) == len(forms)


def form_str(f: Form) -> str:
    if not f:
        return "0"
    parts = []
    for v, c in sorted(f.items(), key=lambda kv: _var_key(kv[0])):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        parts.append(f"{sign}{'' if mag == 1 else str(mag) + '*'}{v}")
    s = "".join(parts)
    return s[1:] if s.startswith("+") else s


def _var_key(name: str):
    head = name.rstrip("0123456789")
    tail = name[len(head):]
    return (head, int(tail) if tail else -1, name)


# ------------------------------------------------------------ diagrams

@dataclass(frozen=True)
class Line:
    name: str
    kind: str          # "simple", "root", "leg", "double"
    ends: tuple        # one vertex, or (lower, upper) / (i, j)

    @property
    def is_phi(self) -> bool:
        return self.kind in ("leg", "double")


@dataclass(frozen=True)
class Subgraph:
    """Connected set of lines of a half-diagram, with the vertices they touch."""

    lines: frozenset
    vertices: frozenset

    @property
    def name(self) -> str:
        return "{" + ",".join(sorted(self.lines, key=_var_key)) + "}"

    def __lt__(self, other: "Subgraph") -> bool:
        return (len(self.lines), sorted(self.lines)) < (len(other.lines), sorted(other.lines))

    def __repr__(self) -> str:
        return f"Subgraph{self.name}"


class HalfDiagram:
    """Tree Feynman half-diagram of a forest with contracted vertex pairs."""

    def __init__(self, parents: Mapping, contractions: Iterable[Sequence] = ()):
        self.parents: dict = dict(parents)
        for v, p in self.parents.items():
            if p is not None and p not in self.parents:
                raise ValueError(f"parent {p!r} of {v!r} is not a vertex")
        self._check_acyclic()
        pairs = []
        used: set = set()
        for pair in contractions:
            i, j = tuple(pair)
            if i == j:
                raise InvalidContraction(f"vertex {i!r} paired with itself")
            for v in (i, j):
                if v not in self.parents:
                    raise InvalidContraction(f"unknown vertex {v!r}")
                if v in used:
                    raise InvalidContraction(f"vertex {v!r} contracted twice")
                used.add(v)
            pairs.append((i, j))
        self.contractions: tuple = tuple(pairs)
        self.children: dict = {v: [] for v in self.parents}
        for v, p in self.parents.items():
            if p is not None:
                self.children[p].append(v)
        self.vertices: tuple = tuple(self.parents)
        self._partner = {}
        for i, j in pairs:
            self._partner[i] = (j, f"xi({i},{j})", 1)
            self._partner[j] = (i, f"xi({i},{j})", -1)
        lines: dict[str, Line] = {}
        for v, p in self.parents.items():
            if p is None:
                lines[f"zeta{v}"] = Line(f"zeta{v}", "root", (v,))
            else:
                lines[f"zeta{v}"] = Line(f"zeta{v}", "simple", (p, v))
        for v in self.parents:
            if v not in self._partner:
                lines[f"xi{v}"] = Line(f"xi{v}", "leg", (v,))
        for i, j in pairs:
            lines[f"xi({i},{j})"] = Line(f"xi({i},{j})", "double", (i, j))
        self.lines: dict[str, Line] = lines

    def _check_acyclic(self) -> None:
        for v in self.parents:
            seen = set()
            while v is not None:
                if v in seen:
                    raise ValueError("parent map has a cycle")
                seen.add(v)
                v = self.parents[v]

    # -- construction helpers
    @classmethod
    def from_forest(cls, forest: Forest, contractions: Iterable[Sequence] = ()) -> "HalfDiagram":
        parents: dict = {}

        def walk(t: DecoratedTree, p) -> None:
            parents[t.decoration] = p
            for c in t.children:
                walk(c, t.decoration)

        for t in forest.trees:
            walk(t, None)
        return cls(parents, contractions)

    @classmethod
    def from_json(cls, obj: Mapping) -> "HalfDiagram":
        def lab(x):
            if x is None:
                return None
            if isinstance(x, str) and x.lstrip("-").isdigit():
                return int(x)
            return x

        parents = {lab(k): lab(v) for k, v in obj["parents"].items()}
        pairs = [tuple(lab(x) for x in p) for p in obj.get("contractions", [])]
        return cls(parents, pairs)

    def to_json(self) -> dict:
        return {
            "parents": {str(v): (None if p is None else p) for v, p in self.parents.items()},
            "contractions": [list(p) for p in self.contractions],
        }

    # -- basic structure
    @property
    def roots(self) -> list:
        return [v for v, p in self.parents.items() if p is None]

    @property
    def legs(self) -> list[str]:
        return [n for n, l in self.lines.items() if l.kind == "leg"]

    def phi_line(self, v) -> str:
        if v in self._partner:
            return self._partner[v][1]
        return f"xi{v}"

    def lines_at(self, v) -> list[str]:
        out = [f"zeta{v}", self.phi_line(v)]
        out += [f"zeta{c}" for c in self.children[v]]
        return out

    def line_vertices(self, name: str) -> tuple:
        return self.lines[name].ends

    @property
    def is_totally_contracted(self) -> bool:
        return not self.legs

    def equations(self) -> list[dict]:
        rows = []
        for v in self.vertices:
            r: dict[str, Fraction] = {f"zeta{v}": Fraction(1)}
            if v in self._partner:
                _, name, sgn = self._partner[v]
                r[name] = r.get(name, 0) - sgn
            else:
                r[f"xi{v}"] = Fraction(-1)
            for c in self.children[v]:
                r[f"zeta{c}"] = Fraction(-1)
            rows.append({k: Fraction(x) for k, x in r.items() if x != 0})
        return rows

    def default_preference(self) -> list[str]:
        order = [f"zeta{r}" for r in self.roots]
        order += [f"zeta{v}" for v in self.vertices if self.parents[v] is not None]
        order += [n for n, l in self.lines.items() if l.kind == "double"]
        order += self.legs
        return order

    def solve(self, basis: Sequence[str] | None = None,
              prefer: Sequence[str] | None = None) -> tuple[list[str], dict[str, Form]]:
        """Express every line momentum through a set of free momenta.

        With ``basis`` given it must be a valid choice of free variables;
        otherwise variables early in :meth:`default_preference` are kept free.
        """
        if basis is not None:
            pref = list(basis)
        else:
            pref = list(dict.fromkeys(prefer)) if prefer is not None else self.default_preference()
        rest = [n for n in self.default_preference() if n not in pref]
        order = list(reversed(rest)) + list(reversed(pref))
        red, piv = _rref(self.equations(), order)
        free = [n for n in pref if n not in piv] + [n for n in rest if n not in piv]
        if basis is not None and set(free) != set(basis):
            raise ValueError(f"{list(basis)} is not a set of independent momenta; free set is {free}")
        forms: dict[str, Form] = {}
        for n in free:
            forms[n] = Form.basis(n)
        for r, p in zip(red, piv):
            forms[p] = Form({v: -c for v, c in r.items() if v != p})
        free_sorted = list(basis) if basis is not None else free
        return free_sorted, {n: forms[n] for n in self.lines}

    def rank(self) -> int:
        _, piv = _rref(self.equations(), list(self.lines))
        return len(piv)

    def internal_lines(self) -> list[str]:
        return [n for n, l in self.lines.items() if l.kind in ("simple", "double")]

    def components(self) -> list[frozenset]:
        """Vertex sets connected by simple and double lines."""
        adj = {v: set() for v in self.vertices}
        for n in self.internal_lines():
            a, b = self.lines[n].ends
            adj[a].add(b)
            adj[b].add(a)
        return _components(adj)

    def loop_count(self) -> int:
        """Free internal momenta once every external momentum is fixed to zero."""
        internal = set(self.internal_lines())
        rows = []
        for r in self.equations():
            rr = {k: c for k, c in r.items() if k in internal}
            if rr:
                rows.append(rr)
        _, piv = _rref(rows, sorted(internal))
        return len(internal) - len(piv)

    # -- subgraphs
    def subgraph(self, lines: Iterable[str]) -> Subgraph:
        lines = frozenset(lines)
        for n in lines:
            if n not in self.lines:
                raise KeyError(n)
        verts = frozenset(v for n in lines for v in self.lines[n].ends)
        if not lines or not _connected_lines(self, lines):
            raise ValueError("subgraph must be a non-empty connected set of lines")
        return Subgraph(lines, verts)

    def vertex_subgraph(self, vertices: Iterable) -> Subgraph:
        """Lines induced by a vertex set, root legs excluded."""
        vs = frozenset(vertices)
        lines = set()
        for n, l in self.lines.items():
            if l.kind == "root":
                continue
            if all(v in vs for v in l.ends):
                lines.add(n)
        return self.subgraph(lines)

    @cached_property
    def total(self) -> Subgraph:
        return Subgraph(frozenset(self.lines), frozenset(self.vertices))

    def external_lines(self, g: Subgraph) -> list[str]:
        return [n for n, l in self.lines.items()
                if n not in g.lines and any(v in g.vertices for v in l.ends)]

    def external_zeta_lines(self, g: Subgraph) -> list[str]:
        return [n for n in self.external_lines(g) if self.lines[n].kind in ("simple", "root")]

    def n_phi(self, g: Subgraph) -> int:
        """External phi-legs of ``g``: vertices whose phi-line is not in ``g``."""
        return sum(1 for v in g.vertices if self.phi_line(v) not in g.lines)

    def is_divergent(self, g: Subgraph) -> bool:
        return self.n_phi(g) == 0

    def is_bilateral(self, g: Subgraph) -> bool:
        return any(self.lines[n].kind == "leg" for n in g.lines)

    def is_total(self, g: Subgraph) -> bool:
        comp = next(c for c in self.components() if g.vertices <= c)
        needed = {n for n, l in self.lines.items() if l.ends[0] in comp}
        return needed <= g.lines

    def omega_half(self, g: Subgraph) -> DivergenceDegree:
        return 1 - len(g.vertices) * ALPHA - self.n_phi(g) * (1 - ALPHA)

    def omega(self, g: Subgraph) -> DivergenceDegree:
        """Degree of divergence of the mirrored subgraph.

        A bilateral subgraph is counted on both sides; a unilateral one is two
        disconnected copies and is reported per copy.
        """
        if self.is_bilateral(g):
            return 1 - 2 * len(g.vertices) * ALPHA - 2 * self.n_phi(g) * (1 - ALPHA)
        return self.omega_half(g)

    def omega_star(self, g: Subgraph, is_total: bool | None = None,
                   n_external: int | None = None) -> DivergenceDegree:
        """Degree of divergence after renormalization.

        ``n_external`` defaults to the number of external zeta-lines, each of
        which is zeroed once by the subtractions seen from the scales below.
        """
        if is_total is None:
            is_total = self.is_total(g)
        if n_external is None:
            n_external = max(1, len(self.external_zeta_lines(g)))
        return omega_star_value(self.omega(g), self.is_bilateral(g), self.is_divergent(g),
                                is_total, n_external)

    def tau_zeroed(self, g: Subgraph) -> list[str]:
        """External momenta set to zero by the Taylor operator of ``g``.

        Internal simple lines of the half-diagram leaving ``g`` are zeroed;
        when there are none (``g`` spans its component) the root legs are.
        Uncontracted phi-legs are never zeroed.
        """
        ext = self.external_zeta_lines(g)
        simple = [n for n in ext if self.lines[n].kind == "simple"]
        return simple if simple else [n for n in ext if self.lines[n].kind == "root"]

    # -- subgraph enumeration
    def connected_vertex_sets(self, min_size: int = 2) -> list[frozenset]:
        adj = {v: set() for v in self.vertices}
        for n in self.internal_lines():
            a, b = self.lines[n].ends
            adj[a].add(b)
            adj[b].add(a)
        out = set()
        for r in range(min_size, len(self.vertices) + 1):
            for vs in combinations(self.vertices, r):
                s = frozenset(vs)
                sub = {v: adj[v] & s for v in s}
                if len(_components(sub)) == 1:
                    out.add(s)
        return sorted(out, key=lambda s: (len(s), sorted(map(str, s))))

    def divergent_vertex_subgraphs(self) -> list[Subgraph]:
        """Divergent subgraphs induced by connected vertex sets (at least one internal line)."""
        out = []
        for s in self.connected_vertex_sets(2):
            g = self.vertex_subgraph(s)
            if self.is_divergent(g):
                out.append(g)
        return out

    def divergent_line_subgraphs(self, include_total: bool = False) -> list[Subgraph]:
        """Every connected divergent line set, root legs optional."""
        out: set[Subgraph] = set()
        verts = list(self.vertices)
        for r in range(1, len(verts) + 1):
            for vs in combinations(verts, r):
                s = frozenset(vs)
                forced = set()
                ok = True
                for v in s:
                    phi = self.phi_line(v)
                    if any(u not in s for u in self.lines[phi].ends):
                        ok = False
                        break
                    forced.add(phi)
                if not ok:
                    continue
                simple = [n for n in self.internal_lines()
                          if self.lines[n].kind == "simple" and all(u in s for u in self.lines[n].ends)]
                roots = [f"zeta{v}" for v in s if self.parents[v] is None]
                for k in range(len(simple) + 1):
                    for chosen in combinations(simple, k):
                        lines = forced | set(chosen)
                        if not _connected_lines(self, lines):
                            continue
                        for kr in range(len(roots) + 1):
                            for rl in combinations(roots, kr):
                                g = Subgraph(frozenset(lines | set(rl)), s)
                                if include_total or not self.is_total(g):
                                    out.add(g)
        return sorted(out)

    # -- export
    def to_dot(self, name: str = "G", mirror: bool = False) -> str:
        lines = [f"graph {name} {{", "  node [shape=circle];"]
        sides = [("", "")] + ([("m", "'")] if mirror else [])
        for tag, mark in sides:
            for v in self.vertices:
                lines.append(f'  "{tag}{v}" [label="{v}{mark}"];')
            for n, l in self.lines.items():
                if l.kind == "simple":
                    a, b = l.ends
                    lines.append(f'  "{tag}{a}" -- "{tag}{b}" [label="{n}"];')
                elif l.kind == "root":
                    (v,) = l.ends
                    lines.append(f'  "{tag}ext{v}" [shape=point];')
                    lines.append(f'  "{tag}{v}" -- "{tag}ext{v}" [label="{n}"];')
                elif l.kind == "double":
                    a, b = l.ends
                    lines.append(f'  "{tag}{a}" -- "{tag}{b}" [label="{n}", color="black:white:black"];')
        for n in self.legs:
            (v,) = self.lines[n].ends
            if mirror:
                lines.append(f'  "{v}" -- "m{v}" [label="{n}", style=dashed];')
            else:
                lines.append(f'  "leg{v}" [shape=point];')
                lines.append(f'  "{v}" -- "leg{v}" [label="{n}", style=dashed];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"HalfDiagram(parents={self.parents}, contractions={list(self.contractions)})"


def _components(adj: Mapping) -> list[frozenset]:
    seen: set = set()
    out = []
    for v in adj:
        if v in seen:
            continue
        stack, comp = [v], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        out.append(frozenset(comp))
    return out


def _connected_lines(h: HalfDiagram, lines: Iterable[str]) -> bool:
    lines = list(lines)
    if not lines:
        return False
    adj: dict = {}
    for n in lines:
        ends = h.lines[n].ends
        for v in ends:
            adj.setdefault(v, set())
        if len(ends) == 2:
            adj[ends[0]].add(ends[1])
            adj[ends[1]].add(ends[0])
    return len(_components(adj)) == 1


def build_half_diagram(forest, contractions: Iterable[Sequence] = ()) -> HalfDiagram:
    """Half-diagram of a forest (``Forest`` or parent map) with contracted pairs."""
    if isinstance(forest, Forest):
        return HalfDiagram.from_forest(forest, contractions)
    return HalfDiagram(forest, contractions)


def omega_star_value(omega: DivergenceDegree, bilateral: bool, divergent: bool,
                     is_total: bool, n_external: int = 1) -> DivergenceDegree:
    if is_total or not divergent:
        return omega
    return omega - (2 if bilateral else 1) * n_external


@dataclass(frozen=True)
class SymmetricDiagram:
    """A half-diagram glued to its mirror image along the uncontracted legs."""

    base: HalfDiagram

    @property
    def bridges(self) -> list[str]:
        return self.base.legs

    @property
    def bilateral(self) -> bool:
        return bool(self.bridges)

    @property
    def vanishes_by_symmetry(self) -> bool:
        return self.base.is_totally_contracted

    def omega(self) -> DivergenceDegree:
        return self.base.omega(self.base.total)

    def to_dot(self) -> str:
        return self.base.to_dot("G", mirror=True)


# ------------------------------------------------------------ amplitudes

@dataclass(frozen=True)
class Factor:
    kind: str                 # "abs": |form|^exponent ; "inv": 1/form
    form: Form
    exponent: DivergenceDegree | None
    line: str

    def __str__(self) -> str:
        if self.kind == "inv":
            return f"1/({form_str(self.form)})"
        return f"|{form_str(self.form)}|^({self.exponent})"

    def with_form(self, f: Form) -> "Factor":
        return Factor(self.kind, f, self.exponent, self.line)


@dataclass(frozen=True)
class AmplitudeTerm:
    sign: int
    factors: tuple
    forest: tuple = ()           # subgraphs whose Taylor operator was applied
    zeroed: tuple = ()           # (subgraph name, zeroed momenta) records

    def __str__(self) -> str:
        body = " * ".join(map(str, self.factors)) or "1"
        return ("+" if self.sign > 0 else "-") + " " + body


@dataclass
class AmplitudeExpression:
    """Signed sum of factor products over a set of free momenta."""

    variables: tuple
    terms: list
    external: tuple = ()
    conservation: tuple = ()     # forms that must vanish (delta constraints)
    vanishes_by_symmetry: bool = False
    mirror: "AmplitudeExpression | None" = None

    def __len__(self) -> int:
        return len(self.terms)

    def __str__(self) -> str:
        s = "\n".join(map(str, self.terms))
        if self.mirror is not None:
            s = f"({s}) x mirror"
        return s

    def _compile(self):
        key = []
        index: dict = {}
        term_idx = []
        for t in self.terms:
            ids = []
            for f in t.factors:
                k = (f.kind, f.form, f.exponent)
                if k not in index:
                    index[k] = len(key)
                    key.append(k)
                ids.append(index[k])
            term_idx.append(ids)
        mat = np.zeros((len(key), len(self.variables)))
        pos = {v: i for i, v in enumerate(self.variables)}
        for r, (_, form, _) in enumerate(key):
            for v, c in form.items():
                mat[r, pos[v]] = float(c)
        return key, mat, term_idx

    def evaluate_terms(self, x: np.ndarray, alpha: float) -> np.ndarray:
        """Per-term values at points ``x`` of shape (N, len(variables)); returns (N, terms)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        key, mat, term_idx = self._compile_cached()
        vals = x @ mat.T if len(key) else np.zeros((x.shape[0], 0))
        fac = np.empty_like(vals)
        with np.errstate(divide="ignore", invalid="ignore"):
            for r, (kind, _, e) in enumerate(key):
                if kind == "inv":
                    fac[:, r] = 1.0 / vals[:, r]
                else:
                    fac[:, r] = np.abs(vals[:, r]) ** e(alpha)
        out = np.empty((x.shape[0], len(self.terms)))
        for k, (t, ids) in enumerate(zip(self.terms, term_idx)):
            out[:, k] = t.sign * (np.prod(fac[:, ids], axis=1) if ids else 1.0)
        return out

    def _compile_cached(self):
        c = getattr(self, "_cache", None)
        if c is None or c[0] is not self.terms or c[1] != len(self.terms):
            c = (self.terms, len(self.terms), self._compile())
            self._cache = c
        return c[2]

    def evaluate(self, x: np.ndarray, alpha: float) -> np.ndarray:
        v = self.evaluate_terms(x, alpha).sum(axis=1)
        if self.mirror is not None:
            v = v * self.mirror.evaluate(x, alpha)
        return v

    def evaluate_at(self, values: Mapping[str, float], alpha: float) -> float:
        x = np.array([[values[v] for v in self.variables]], dtype=float)
        return float(self.evaluate(x, alpha)[0])

    def to_json(self) -> dict:
        return {
            "variables": list(self.variables),
            "vanishes_by_symmetry": self.vanishes_by_symmetry,
            "conservation": [form_str(f) for f in self.conservation],
            "terms": [
                {
                    "sign": t.sign,
                    "factors": [str(f) for f in t.factors],
                    "forest": [g.name for g in t.forest],
                    "zeroed": [{"subgraph": n, "momenta": list(z)} for n, z in t.zeroed],
                }
                for t in self.terms
            ],
        }


def amplitude(h: HalfDiagram, basis: Sequence[str] | None = None) -> AmplitudeExpression:
    """Feynman-rule amplitude of a half-diagram in a chosen momentum basis."""
    free, forms = h.solve(basis)
    factors = []
    for n, l in h.lines.items():
        if l.kind == "leg":
            factors.append(Factor("abs", forms[n], LEG_EXPONENT, n))
        elif l.kind == "double":
            factors.append(Factor("abs", forms[n], DOUBLE_EXPONENT, n))
        elif l.kind == "simple":
            factors.append(Factor("inv", forms[n], None, n))
    ext = tuple(n for n in free if h.lines[n].kind == "root")
    cons = []
    for comp in h.components():
        f = Form()
        for n, l in h.lines.items():
            if l.ends[0] in comp and l.kind in ("root",):
                f = f + forms[n]
            if l.ends[0] in comp and l.kind == "leg":
                f = f - forms[n]
        if f:
            cons.append(f)
    vanish = h.is_totally_contracted
    return AmplitudeExpression(tuple(free), [AmplitudeTerm(1, tuple(factors))], ext, tuple(cons), vanish)


def amplitude_sq(h: HalfDiagram, basis: Sequence[str] | None = None) -> AmplitudeExpression:
    """Amplitude of the mirrored diagram.

    The bridges are shared by both halves.  Without contractions the mirror
    momenta coincide with the original ones, so the result is the square.
    Otherwise the mirror's contracted momenta are independent copies, marked
    with a trailing ``'``.
    """
    a = amplitude(h, basis)
    if not h.contractions:
        return AmplitudeExpression(a.variables, a.terms, a.external, a.conservation,
                                   a.vanishes_by_symmetry, mirror=a)
    legs = set(h.legs)
    if basis is None:
        free, _ = h.solve(prefer=h.legs + h.default_preference())
    else:
        free = list(basis)
    if not legs <= set(free):
        raise ValueError("choose a basis containing every bridge")
    a = amplitude(h, free)
    ren = {v: (v if v in legs else v + "'") for v in free}
    mirror_terms = []
    for t in a.terms:
        fs = tuple(f.with_form(Form({ren[v]: c for v, c in f.form.items()})) for f in t.factors)
        mirror_terms.append(AmplitudeTerm(t.sign, fs))
    variables = tuple(free) + tuple(ren[v] for v in free if v not in legs)
    mirror = AmplitudeExpression(variables, mirror_terms)
    base = AmplitudeExpression(variables, a.terms, a.external, a.conservation, a.vanishes_by_symmetry)
    base.mirror = mirror
    return base


# ------------------------------------------------------------ forests and BPHZ

def compatible(g: Subgraph, h: Subgraph) -> bool:
    """Nested (by lines) or vertex-disjoint."""
    return g.lines <= h.lines or h.lines <= g.lines or not (g.vertices & h.vertices)


def is_forest(gs: Iterable[Subgraph]) -> bool:
    gs = list(gs)
    return len(set(gs)) == len(gs) and all(compatible(a, b) for a, b in combinations(gs, 2))


def enumerate_forests(subgraphs: Sequence[Subgraph], limit: int | None = None) -> list[tuple]:
    """All pairwise compatible subsets (the empty forest included)."""
    subs = list(subgraphs)
    n = len(subs)
    ok = [0] * n
    for i in range(n):
        for j in range(n):
            if i != j and compatible(subs[i], subs[j]):
                ok[i] |= 1 << j
    out: list[tuple] = []

    def rec(start: int, allowed: int, chosen: list) -> None:
        out.append(tuple(subs[k] for k in chosen))
        if limit is not None and len(out) > limit:
            raise OverflowError("forest enumeration exceeded limit")
        for k in range(start, n):
            if allowed >> k & 1:
                chosen.append(k)
                rec(k + 1, allowed & ok[k], chosen)
                chosen.pop()

    rec(0, (1 << n) - 1, [])
    return out


def enumerate_divergent_forests(h: HalfDiagram, subgraphs: Sequence[Subgraph] | None = None) -> list[tuple]:
    if subgraphs is None:
        subgraphs = h.divergent_vertex_subgraphs()
    return enumerate_forests(subgraphs)


class _Taylor:
    """Taylor operator of one subgraph as a linear substitution on forms."""

    def __init__(self, h: HalfDiagram, g: Subgraph, forms: Mapping[str, Form], free: Sequence[str]):
        self.g = g
        self.zeroed = h.tau_zeroed(g)
        kept_ext = [n for n in h.external_zeta_lines(g) if n not in self.zeroed]
        own = sorted(g.lines, key=_var_key)
        cands = self.zeroed + kept_ext + [n for n in free if n in g.lines] + own
        basis: list[Form] = []
        names: list[str] = []
        for n in cands:
            f = forms[n]
            if not f or n in names:
                continue
            if _independent(basis + [f]):
                basis.append(f)
                names.append(n)
        self.basis = basis
        self.names = names

    def __call__(self, f: Form) -> Form:
        coef = _decompose(f, self.basis)
        if coef is None:
            raise ValueError(f"form {form_str(f)} is outside subgraph {self.g.name}")
        out = Form()
        for c, b, n in zip(coef, self.basis, self.names):
            if n not in self.zeroed:
                out = out + c * b
        return out


def bphz_renormalize(h: HalfDiagram, subgraphs: Sequence[Subgraph] | None = None,
                     basis: Sequence[str] | None = None,
                     forests: Sequence[tuple] | None = None) -> AmplitudeExpression:
    """Forest formula: sum over forests F of prod_{g in F} (-tau_g) applied to A.

    ``subgraphs`` defaults to the divergent vertex-induced subgraphs.  Passing
    the local subgraphs of a scale attribution gives the useful renormalization.
    """
    if subgraphs is None:
        subgraphs = h.divergent_vertex_subgraphs()
    base = amplitude(h, basis)
    free, forms = h.solve(base.variables)
    ops = {g: _Taylor(h, g, forms, free) for g in subgraphs}
    if forests is None:
        forests = enumerate_forests(subgraphs)
    (t0,) = base.terms
    terms = []
    for F in forests:
        factors = list(t0.factors)
        zeroed = []
        for g in sorted(F):
            op = ops[g]
            factors = [fa.with_form(op(fa.form)) if fa.line in g.lines else fa for fa in factors]
            zeroed.append((g.name, tuple(op.zeroed)))
        terms.append(AmplitudeTerm((-1) ** len(F), tuple(factors), tuple(sorted(F)), tuple(zeroed)))
    return AmplitudeExpression(base.variables, terms, base.external, base.conservation,
                               base.vanishes_by_symmetry)


# ------------------------------------------------------------ worked examples

def example_diagram() -> HalfDiagram:
    """Four-vertex tree: root 1 with children 2 and 4, and 3 above 2."""
    return HalfDiagram({1: None, 2: 1, 3: 2, 4: 1})


def contracted_example() -> HalfDiagram:
    """Four-vertex tree plus a 2-ladder (vertices 5 -> 6) with pairs (1,5), (2,4)."""
    return HalfDiagram({1: None, 2: 1, 3: 2, 4: 1, 5: None, 6: 5}, [(1, 5), (2, 4)])


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, default=str)
