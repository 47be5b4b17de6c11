import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbmrough.errors import TieError
from fbmrough.fno import (
    HeapOrderedForest,
    MockData,
    PathModel,
    SkeletonData,
    default_path,
    forest_integral,
    iterated_integral_exact,
    iterated_integral_quadrature,
    permutation_graph,
    reordered_integral,
    rough_path,
    split_measure,
    trunk,
    verify_chen,
    verify_shuffle,
    word_pairs,
)
from fbmrough.hopf_trees import all_words

times = st.floats(0.0, 1.0, allow_nan=False)


def test_heap_order_is_enforced():
    with pytest.raises(ValueError):
        HeapOrderedForest.from_parents({2: None, 1: 2})
    assert trunk(3).parents() == {1: None, 2: 1, 3: 2}


def test_permutation_graph_example_structure():
    g = permutation_graph(3, (2, 3, 1))
    got = {tuple(sorted(f.parents().items(), key=lambda kv: kv[0])): int(c) for f, c in g.items()}
    assert got == {((1, None), (2, 1), (3, None)): 1, ((1, None), (2, 1), (3, 1)): -1}


def test_identity_sector_is_the_trunk():
    for n in range(1, 5):
        g = permutation_graph(n, tuple(range(1, n + 1)))
        assert dict(g.items()) == {trunk(n): 1}


def test_permutation_graph_rejects_non_permutations():
    with pytest.raises(ValueError):
        permutation_graph(3, (1, 1, 2))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_each_sector_matches_nested_quadrature(n):
    freqs = [0.9, -1.7, 2.3, 0.41][:n]
    path = PathModel(tuple(((w, 1 / (1j * w)),) for w in freqs))
    direct = iterated_integral_quadrature(path, tuple(range(1, n + 1)), 0.2, 0.95, nodes=32)
    for sigma in permutations(range(1, n + 1)):
        xi = {r: freqs[sigma[r - 1] - 1] for r in range(1, n + 1)}
        val = sum(float(c) * forest_integral(f, xi, 0.2, 0.95) for f, c in permutation_graph(n, sigma).items())
        assert abs(val - direct) < 1e-10


@given(st.floats(0.05, 0.45), st.floats(0.55, 0.95), st.sampled_from([w for n in (1, 2, 3) for w in all_words(n, 2)]))
def test_fourier_normal_ordering_identity(s, t, w):
    p = default_path()
    assert abs(reordered_integral(p, w, s, t) - iterated_integral_exact(p, w, s, t)) < 1e-11


def test_exact_integral_matches_quadrature():
    p = default_path()
    for w in [(1,), (1, 2), (2, 1, 2), (1, 1, 2, 2)]:
        assert abs(iterated_integral_exact(p, w, 0.1, 0.9) - iterated_integral_quadrature(p, w, 0.1, 0.9, 32)) < 1e-10


def test_level_one_is_the_increment():
    p = default_path()
    for i in (1, 2):
        inc = p.value(i, 0.8) - p.value(i, 0.3)
        assert abs(rough_path(SkeletonData(), p, (i,), 0.3, 0.8).value - inc) < 1e-12


def test_skeleton_data_gives_iterated_integrals():
    p = default_path()
    for w in [(1, 2), (2, 2, 1), (1, 2, 1, 2)]:
        j = rough_path(SkeletonData(), p, w, 0.15, 0.85).value
        assert abs(j - iterated_integral_exact(p, w, 0.15, 0.85)) < 1e-10


@pytest.mark.parametrize("td", [SkeletonData(), MockData(7)], ids=["skeleton", "mock"])
def test_chi_and_phi_definitions_agree(td):
    p = default_path()
    for n in range(1, 5):
        for w in all_words(n, 2):
            a = rough_path(td, p, w, 0.2, 0.7, method="chi").value
            b = rough_path(td, p, w, 0.2, 0.7, method="phi").value
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@given(st.lists(times, min_size=3, max_size=3), st.integers(0, 1000))
def test_mock_data_chen_and_shuffle(ts, seed):
    s, u, t = sorted(ts)
    td = MockData(seed)
    p = default_path()
    words = [w for n in (1, 2, 3) for w in all_words(n, 2)]
    assert verify_chen(td, p, words, [(s, u, t)])["max_residual"] < 1e-10
    assert verify_shuffle(td, p, word_pairs(3, 2), [(s, t)])["max_residual"] < 1e-10


def test_mock_data_is_not_the_skeleton():
    p = default_path()
    a = rough_path(MockData(1), p, (1, 2), 0.0, 1.0).value
    b = rough_path(SkeletonData(), p, (1, 2), 0.0, 1.0).value
    assert abs(a - b) > 1e-3


def test_split_measure_weights_sum_to_product():
    p = default_path()
    sectors = split_measure(p, (1, 2, 1))
    total = sum(wt for sm in sectors.values() for _, wt, *_ in sm.atoms)
    direct = sum(wt for _, wt, _ in p.atoms((1, 2, 1)))
    assert abs(total - direct) < 1e-12


def test_ties_split_or_raise():
    with pytest.raises(TieError):
        PathModel((((1.0, 1.0),), ((-1.0, 1.0),)))
    # a repeated letter reuses the same mode, so every atom is a tie
    p = PathModel((((1.3, 0.5 + 0.2j),),))
    with pytest.raises(TieError):
        split_measure(p, (1, 1), ties="error")
    sectors = split_measure(p, (1, 1))
    assert set(sectors) == {(1, 2), (2, 1)}
    assert abs(reordered_integral(p, (1, 1), 0.0, 1.0) - iterated_integral_exact(p, (1, 1), 0.0, 1.0)) < 1e-12


def test_path_model_dict_round_trip():
    p = default_path()
    q = PathModel.from_dict(p.to_dict())
    assert q == p
    r = PathModel.from_dict({"modes": [[{"frequency": 1.5, "amplitude": [0.3, -0.2]}]], "real": True})
    assert abs(r.value(1, 0.4).imag) < 1e-15
