import random
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbmrough.errors import InvalidContraction
from fbmrough.feynman import (
    ALPHA,
    DivergenceDegree,
    HalfDiagram,
    SymmetricDiagram,
    amplitude,
    bphz_renormalize,
    contracted_example,
    enumerate_divergent_forests,
    enumerate_forests,
    example_diagram,
    omega_star_value,
)
from fbmrough.multiscale import random_diagram

seeds = st.integers(0, 2**32 - 1)


def _diagram(seed, n=None):
    return random_diagram(random.Random(seed), max_vertices=7, p_root=0.3, p_contract=0.6, n=n)


def test_divergence_degree_arithmetic():
    w = 1 - 8 * ALPHA
    assert w == DivergenceDegree(1, -8)
    assert str(w) == "1-8α"
    assert w(0.2) == pytest.approx(-0.6)
    assert (w - 2) == DivergenceDegree(-1, -8)
    assert DivergenceDegree(-1, -2).le_on(DivergenceDegree(0, -1), 0.0, 0.5)


def test_example_momenta():
    h = example_diagram()
    free, forms = h.solve(["zeta1", "zeta2", "zeta3", "zeta4"])
    assert free == ["zeta1", "zeta2", "zeta3", "zeta4"]
    assert str(forms["xi1"]) == str(forms["zeta1"] - forms["zeta2"] - forms["zeta4"])
    assert h.rank() == 4 and h.loop_count() == 0


def test_example_amplitude_value():
    e = amplitude(example_diagram(), ["zeta1", "zeta2", "zeta3", "zeta4"])
    # xi = (-6, -1, 3, 5) at zeta = (1, 2, 3, 5); no factor for the root line
    expected = (6 * 1 * 3 * 5) ** 0.3 / (2 * 3 * 5)
    assert e.evaluate_at({"zeta1": 1.0, "zeta2": 2.0, "zeta3": 3.0, "zeta4": 5.0}, 0.2) == pytest.approx(expected)


def test_example_omegas():
    h = example_diagram()
    by_name = {g.name: g for g in h.divergent_vertex_subgraphs()}
    g = by_name["{xi2,xi3,zeta3}"]
    assert h.omega(g) == 1 - 4 * ALPHA
    assert h.omega_star(g) == -1 - 4 * ALPHA
    assert h.omega(h.total) == h.omega_star(h.total) == 1 - 8 * ALPHA


def test_omega_star_rule():
    w = DivergenceDegree(1, -4)
    assert omega_star_value(w, True, True, False, 1) == -1 - 4 * ALPHA
    assert omega_star_value(w, False, True, False, 1) == -4 * ALPHA
    assert omega_star_value(w, True, False, False, 3) == w
    assert omega_star_value(w, True, True, True, 3) == w


def test_forest_count_matches_brute_force():
    h = example_diagram()
    subs = h.divergent_vertex_subgraphs()

    def ok(a, b):
        return a.lines <= b.lines or b.lines <= a.lines or not (a.vertices & b.vertices)

    brute = sum(1 for k in range(len(subs) + 1) for c in combinations(subs, k)
                if all(ok(a, b) for a, b in combinations(c, 2)))
    assert brute == len(enumerate_divergent_forests(h)) == 22


@given(seeds)
def test_forest_enumeration_against_brute_force(seed):
    h = _diagram(seed, n=random.Random(seed).randint(2, 5))
    subs = h.divergent_vertex_subgraphs()[:10]

    def ok(a, b):
        return a.lines <= b.lines or b.lines <= a.lines or not (a.vertices & b.vertices)

    brute = {frozenset(c) for k in range(len(subs) + 1) for c in combinations(subs, k)
             if all(ok(a, b) for a, b in combinations(c, 2))}
    assert {frozenset(F) for F in enumerate_forests(subs)} == brute


def test_enumeration_limit():
    h = example_diagram()
    with pytest.raises(OverflowError):
        enumerate_forests(h.divergent_vertex_subgraphs(), limit=5)


def test_contracted_example_conservation():
    h = contracted_example()
    free, forms = h.solve()
    rel = forms["xi6"] + forms["xi3"] - forms["zeta1"] - forms["zeta5"]
    assert not rel
    assert h.loop_count() == 1
    e = amplitude(h)
    denominators = {str(f.form) for t in e.terms for f in t.factors if f.kind == "inv"}
    assert len(denominators) == 4


def test_contractions_are_validated():
    with pytest.raises(InvalidContraction):
        HalfDiagram({1: None, 2: 1}, [(1, 1)])
    with pytest.raises(InvalidContraction):
        HalfDiagram({1: None, 2: 1}, [(1, 3)])
    with pytest.raises(InvalidContraction):
        HalfDiagram({1: None, 2: 1, 3: 1}, [(1, 2), (2, 3)])
    with pytest.raises(ValueError):
        HalfDiagram({1: 2, 2: 1})


def test_totally_contracted_ladder_vanishes():
    h = HalfDiagram({1: None, 2: 1}, [(1, 2)])
    assert h.is_totally_contracted
    assert SymmetricDiagram(h).vanishes_by_symmetry
    _, forms = h.solve()
    assert not forms["zeta1"]
    assert amplitude(h).vanishes_by_symmetry


@given(seeds)
def test_vertex_counting_identity(seed):
    h = _diagram(seed)
    for g in h.divergent_line_subgraphs(include_total=True) + [h.total]:
        doubles = sum(1 for n in g.lines if h.lines[n].kind == "double")
        legs = sum(1 for n in g.lines if h.lines[n].kind == "leg")
        assert len(g.vertices) == 2 * doubles + legs + h.n_phi(g)
        if not h.is_bilateral(g):
            assert len(g.vertices) == 2 * doubles + h.n_phi(g)


@given(seeds)
def test_renormalizing_without_divergent_subgraphs_is_identity(seed):
    h = _diagram(seed)
    base = amplitude(h)
    ren = bphz_renormalize(h, subgraphs=[])
    assert len(ren.terms) == 1 and ren.terms[0].factors == base.terms[0].factors


def test_single_vertex_has_no_subtractions():
    h = HalfDiagram({1: None})
    assert h.divergent_vertex_subgraphs() == []
    assert bphz_renormalize(h).terms[0].factors == amplitude(h).terms[0].factors


@given(seeds)
def test_bphz_terms_match_forest_signs(seed):
    h = _diagram(seed, n=random.Random(seed).randint(2, 4))
    subs = h.divergent_vertex_subgraphs()
    forests = enumerate_forests(subs, limit=2000)
    ren = bphz_renormalize(h, subgraphs=subs, forests=forests)
    assert len(ren.terms) == len(forests)
    assert all(t.sign == (-1) ** len(t.forest) for t in ren.terms)


def test_subtracted_amplitude_is_smaller_at_low_external_momentum():
    h = example_diagram()
    basis = ["zeta1", "zeta2", "zeta3", "zeta4"]
    ren = bphz_renormalize(h, basis=basis)
    # zeta1 tiny and internal lines hierarchical: the subtractions cancel most of the bare value
    x = np.array([[1e-3, 1e2, 1e4, 1e3]])
    bare = abs(amplitude(h, basis).evaluate(x, 0.2)[0])
    assert abs(ren.evaluate(x, 0.2)[0]) < 0.1 * bare


def test_json_and_dot():
    h = contracted_example()
    assert HalfDiagram.from_json(h.to_json()).to_json() == h.to_json()
    dot = h.to_dot(mirror=True)
    assert dot.startswith("graph") and "xi(2,4)" in dot
