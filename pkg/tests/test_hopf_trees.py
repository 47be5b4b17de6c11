import random
from math import comb

import pytest
from hypothesis import given, strategies as st

from conftest import random_tree_parents
from fbmrough.algebra import LinearCombination
from fbmrough.hopf_trees import (
    UNIT,
    DecoratedTree,
    Forest,
    all_trees,
    all_words,
    antipode,
    coproduct,
    forest_from_json,
    forest_to_json,
    ladder,
    lc_to_json,
    linear_extensions,
    parse_word,
    shuffle_product,
    theta,
    tree,
    tree_from_json,
    tree_to_json,
    word_antipode,
    word_coproduct,
)
from fbmrough.checks import _tree_axioms, _word_axioms

# number of rooted trees with vertices coloured by 2 letters, n = 1..5 (independent count)
TWO_COLOURED_TREES = [2, 4, 14, 52, 214]

seeds = st.integers(0, 2**32 - 1)


def _random_tree(seed, n, d=2):
    parent, deco = random_tree_parents(random.Random(seed), n, d)
    return DecoratedTree.from_parent_map(parent, deco)


def test_tree_counts():
    assert [len(all_trees(n, 2)) for n in range(1, 6)] == TWO_COLOURED_TREES


def test_cherry_coproduct_has_five_terms():
    t = tree(1, tree(2), tree(3))
    d = coproduct(t)
    assert len(d) == 5
    assert d[(Forest([tree(1)]), Forest([tree(2), tree(3)]))] == 1
    assert d[(Forest([t]), UNIT)] == 1 and d[(UNIT, Forest([t]))] == 1


def test_cherry_theta_two_trunks():
    assert theta(tree(1, tree(2), tree(3))) == LinearCombination([((1, 2, 3), 1), ((1, 3, 2), 1)])


def test_cherry_antipode_recursion():
    t = tree(1, tree(2), tree(3))
    expected = LinearCombination([
        (Forest([t]), -1),
        (Forest([tree(1, tree(2)), tree(3)]), 1),
        (Forest([tree(1, tree(3)), tree(2)]), 1),
        (Forest([tree(1), tree(2), tree(3)]), -1),
    ])
    assert antipode(t) == expected


def test_shuffle_antipode_is_signed_reversal():
    assert word_antipode((1, 2, 2)) == LinearCombination.basis((2, 2, 1), -1)
    assert word_antipode((1, 2)) == LinearCombination.basis((2, 1), 1)


def test_trunk_coproduct_is_deconcatenation():
    def word(f):
        (w,) = theta(f).terms  # a trunk has a single linear extension
        return w

    d = coproduct(ladder(1, 2, 1))
    assert {(word(a), word(b)): c for (a, b), c in d.items()} == dict(word_coproduct((1, 2, 1)).items())


@given(seeds, st.integers(1, 6))
def test_canonical_key_invariant_under_relabelling(seed, n):
    rng = random.Random(seed)
    parent, deco = random_tree_parents(rng, n)
    perm = list(range(1, n + 1))
    rng.shuffle(perm)
    relabel = {v: 100 + perm[v - 1] for v in range(1, n + 1)}
    p2 = {relabel[v]: relabel[p] for v, p in parent.items()}
    d2 = {relabel[v]: c for v, c in deco.items()}
    a = DecoratedTree.from_parent_map(parent, deco)
    b = DecoratedTree.from_parent_map(p2, d2)
    assert a.canonical_key == b.canonical_key and a == b and hash(a) == hash(b)


@given(seeds, st.integers(1, 6))
def test_hopf_axioms_random_trees(seed, n):
    assert _tree_axioms(Forest([_random_tree(seed, n)])) == []


@given(seeds, seeds, st.integers(1, 3), st.integers(1, 3))
def test_theta_is_an_algebra_map(s1, s2, n1, n2):
    a, b = _random_tree(s1, n1), _random_tree(s2, n2)
    lhs = theta(Forest([a, b]))
    rhs = theta(a).bilinear(theta(b), shuffle_product)
    assert lhs == rhs


@given(seeds, st.integers(1, 6))
def test_theta_matches_linear_extension_oracle(seed, n):
    t = _random_tree(seed, n)
    oracle = LinearCombination((w, 1) for w in linear_extensions(t))
    assert theta(t) == oracle


@given(st.lists(st.integers(1, 3), max_size=4), st.lists(st.integers(1, 3), max_size=4))
def test_shuffle_term_count(u, v):
    res = shuffle_product(u, v)
    assert sum(res.terms.values()) == comb(len(u) + len(v), len(u))


@pytest.mark.parametrize("n", range(1, 6))
def test_word_axioms(n):
    for w in all_words(n, 2):
        assert _word_axioms(w) == []


@given(seeds, st.integers(1, 6))
def test_json_round_trip(seed, n):
    t = _random_tree(seed, n)
    assert tree_from_json(tree_to_json(t)) == t
    f = Forest([t, _random_tree(seed + 1, 2)])
    assert forest_from_json(forest_to_json(f)) == f


def test_lc_json_uses_exact_coefficients():
    out = lc_to_json(antipode(tree(1, tree(2))))
    assert {e["coeff"] for e in out} == {"-1", "1"}


def test_parse_word():
    assert parse_word("121") == (1, 2, 1)
    assert parse_word("1, 12") == (1, 12)
    assert parse_word("") == ()


def test_from_parent_map_rejects_bad_input():
    with pytest.raises(ValueError):
        DecoratedTree.from_parent_map({2: 1, 1: 2}, {1: 1, 2: 1})
    with pytest.raises(ValueError):
        DecoratedTree.from_parent_map({}, {1: 1, 2: 1})
