import random

import pytest
from hypothesis import given, strategies as st

from fbmrough.errors import AlphaRangeError
from fbmrough.feynman import ALPHA, DivergenceDegree, compatible, enumerate_forests
from fbmrough.multiscale import (
    EXAMPLE_BASIS,
    ScaleAttribution,
    check_alpha,
    check_forest_classification,
    classify_forest,
    dangerous,
    example_attribution,
    extension,
    gn_tree,
    local_subgraphs,
    omega_star_by_scale,
    power_counting_violations,
    predict_bound,
    random_attribution,
    random_diagram,
    useful_renormalize,
)

seeds = st.integers(0, 2**32 - 1)


def _case(seed, max_vertices=6):
    rng = random.Random(seed)
    h = random_diagram(rng, max_vertices=max_vertices, p_root=0.3, p_contract=0.7)
    return h, random_attribution(h, rng)


def test_example_one_scales():
    h, mu = example_attribution(1)
    assert omega_star_by_scale(h, mu) == {
        4: -1 - 4 * ALPHA, 3: -4 - 8 * ALPHA, 2: -1 - 8 * ALPHA, 1: 1 - 8 * ALPHA}


def test_example_two_scales():
    h, mu = example_attribution(2)
    assert omega_star_by_scale(h, mu) == {
        4: -1 - 2 * ALPHA, 3: -2 - 6 * ALPHA, 2: -2 - 8 * ALPHA, 1: 1 - 8 * ALPHA}


def test_example_one_useful_renormalization():
    h, mu = example_attribution(1)
    assert len(local_subgraphs(h, mu)) == 3
    expr = useful_renormalize(h, mu, EXAMPLE_BASIS[1])
    assert len(expr.terms) == 8
    assert sum(t.sign for t in expr.terms) == 0


def test_from_momenta():
    mu = ScaleAttribution.from_momenta({"a": 1.5, "b": -9.0, "c": 0.3})
    assert mu.scales == {"a": 0, "b": 3, "c": -2}
    assert mu.window("b") == (8.0, 16.0)
    with pytest.raises(ValueError):
        ScaleAttribution({}, M=1.0)


@given(seeds)
def test_gn_nodes_nest(seed):
    h, mu = _case(seed)
    tree = gn_tree(h, mu)
    for node in tree.nodes:
        assert min(mu[n] for n in node.subgraph.lines) >= min(node.scales)
        if node.parent is not None:
            parent = tree.nodes[node.parent]
            assert node.subgraph.lines < parent.subgraph.lines
            assert min(node.scales) > min(parent.scales)
    # any two nodes are nested or disjoint
    subs = tree.subgraphs()
    for a in subs:
        for b in subs:
            assert a.lines <= b.lines or b.lines <= a.lines or not (a.lines & b.lines)


@given(seeds)
def test_classification_properties(seed):
    h, mu = _case(seed, max_vertices=5)
    universe = h.divergent_line_subgraphs()
    try:
        forests = enumerate_forests(universe, limit=3000)
    except OverflowError:
        return
    res = check_forest_classification(h, mu, universe, limit=3000)
    assert res["idempotent"] and res["interval"] and res["extension_is_forest"] and res["ext_empty_is_gn"]
    for F in forests[:200]:
        c = classify_forest(h, F, mu, universe)
        assert set(c.dangerous) | set(c.harmless) == set(F)
        for g in c.extension:
            assert g not in F and all(compatible(g, f) for f in F)
            assert g in dangerous(h, tuple(F) + (g,), mu)


def test_examples_classification():
    for which in (1, 2):
        h, mu = example_attribution(which)
        res = check_forest_classification(h, mu)
        assert res["forests"] == 912
        assert all(res[k] for k in ("idempotent", "interval", "extension_is_forest", "ext_empty_is_gn"))
        ext0 = extension(h, (), mu, h.divergent_line_subgraphs())
        assert set(ext0) <= set(gn_tree(h, mu).subgraphs())


@given(seeds)
def test_power_counting_bounds(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    h = random_diagram(rng, p_root=0.3, p_contract=0.6, n=n)
    assert power_counting_violations(h, 1 / (2 * n)) == []


def test_check_alpha():
    check_alpha(0.18, 2)
    for a, n in [(0.2, 1), (0.25, 1), (0.3, 4), (1.0, 1)]:
        with pytest.raises(AlphaRangeError):
            check_alpha(a, n)


def test_predict_bound_exponent_and_errors():
    h, mu = example_attribution(1)
    p = predict_bound(h, 2, 2, 0.18, 0.1, mu)
    assert p.exponent == 1 - 8 * ALPHA
    assert p.exponent_value == pytest.approx(1 - 8 * 0.18)
    with pytest.raises(AlphaRangeError):
        predict_bound(h, 2, 2, 0.2, 0.1)
    with pytest.raises(AlphaRangeError):
        predict_bound(h, 2, 2, 0.18, 0.18)


@given(st.floats(0.01, 0.15), st.integers(-3, 6), st.floats(0.1, 100.0), st.floats(0.1, 100.0),
       st.floats(1.0, 50.0))
def test_spring_factor_monotonicity(alpha_minus, jref, z1, zq, shrink):
    h, _ = example_attribution(1)
    p = predict_bound(h, 2, 2, 0.18, alpha_minus)
    base = p.evaluate(z1, zq, jref)
    # a smaller first momentum or a larger last one can only lower the prediction
    assert p.evaluate(z1 / shrink, zq, jref) <= base * (1 + 1e-12)
    assert p.evaluate(z1, zq * shrink, jref) <= base * (1 + 1e-12)
    assert base > 0


def test_gn_tree_outputs():
    h, mu = example_attribution(2)
    t = gn_tree(h, mu)
    assert t.to_dot().startswith("digraph GN")
    assert len(t.to_json()["nodes"]) == len(t.nodes)
