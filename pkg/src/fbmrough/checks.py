"""Invariant suites shared by the ``verify`` command and the acceptance tests.

Every check returns a :class:`Check` with a pass flag and a short detail
string; nothing here raises on failure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable

import numpy as np

from .algebra import LinearCombination
from .feynman import DivergenceDegree
from .fno import (
    MockData,
    PathModel,
    SkeletonData,
    default_path,
    forest_integral,
    iterated_integral_quadrature,
    permutation_graph,
    reordered_integral,
    verify_chen,
    verify_shuffle,
    word_pairs,
)
from .hopf_trees import (
    UNIT,
    Forest,
    all_trees,
    all_words,
    antipode,
    coproduct,
    counit,
    forest_product,
    shuffle_lc,
    theta,
    tree,
    word_antipode,
    word_coproduct,
    word_counit,
)
from .multiscale import check_forest_classification, checkable_diagrams, example_attribution, omega_star_by_scale
from .numeric import (
    EXAMPLE_WINDOW,
    QuadratureConfig,
    fbm_covariance_check,
    scan_example,
    scan_holder,
    window_growth,
)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name: str, fn: Callable[[], tuple]) -> Check:
    t0 = time.perf_counter()
    try:
        ok, detail, data = fn()
    except Exception as e:  # a crashing suite is a failed suite
        ok, detail, data = False, f"{type(e).__name__}: {e}", {}
    return Check(name, bool(ok), detail, time.perf_counter() - t0, data)


# ------------------------------------------------------------------ Hopf algebras

def _tree_axioms(f: Forest) -> list[str]:
    bad = []
    d = coproduct(f)
    left = LinearCombination()
    right = LinearCombination()
    for (a, b), c in d.items():
        for (a1, a2), c1 in coproduct(a).items():
            left._add((a1, a2, b), c * c1)
        for (b1, b2), c2 in coproduct(b).items():
            right._add((a, b1, b2), c * c2)
    if left != right:
        bad.append("coassociativity")
    eps = LinearCombination.basis(UNIT, counit(f))
    s_left = LinearCombination()
    s_right = LinearCombination()
    for (a, b), c in d.items():
        s_left = s_left + c * forest_product(antipode(a), LinearCombination.basis(b))
        s_right = s_right + c * forest_product(LinearCombination.basis(a), antipode(b))
    if s_left != eps or s_right != eps:
        bad.append("antipode")
    # theta is a bialgebra morphism compatible with the antipodes
    th = theta(f)
    dth = LinearCombination()
    for w, c in th.items():
        for pair, c2 in word_coproduct(w).items():
            dth._add(pair, c * c2)
    thth = LinearCombination()
    for (a, b), c in d.items():
        for wa, ca in theta(a).items():
            for wb, cb in theta(b).items():
                thth._add((wa, wb), c * ca * cb)
    if dth != thth:
        bad.append("theta-coproduct")
    prod = LinearCombination.basis(())
    for t in f.trees:
        prod = shuffle_lc(prod, theta(t))
    if prod != th:
        bad.append("theta-product")
    if theta(antipode(f)) != th.map(word_antipode):
        bad.append("theta-antipode")
    return bad


def _word_axioms(w: tuple) -> list[str]:
    bad = []
    d = word_coproduct(w)
    left = LinearCombination()
    right = LinearCombination()
    for (a, b), c in d.items():
        for (a1, a2), c1 in word_coproduct(a).items():
            left._add((a1, a2, b), c * c1)
        for (b1, b2), c2 in word_coproduct(b).items():
            right._add((a, b1, b2), c * c2)
    if left != right:
        bad.append("coassociativity")
    eps = LinearCombination.basis((), word_counit(w))
    s_left = LinearCombination()
    s_right = LinearCombination()
    for (a, b), c in d.items():
        s_left = s_left + c * shuffle_lc(word_antipode(a), LinearCombination.basis(b))
        s_right = s_right + c * shuffle_lc(LinearCombination.basis(a), word_antipode(b))
    if s_left != eps or s_right != eps:
        bad.append("antipode")
    return bad


def hopf_suite(max_vertices: int = 5, d: int = 2) -> Check:
    def run():
        failures = []
        n_trees = n_words = 0
        for n in range(1, max_vertices + 1):
            for t in all_trees(n, d):
                n_trees += 1
                failures += [(repr(t), b) for b in _tree_axioms(Forest([t]))]
            for w in all_words(n, d):
                n_words += 1
                failures += [(w, b) for b in _word_axioms(tuple(w))]
        # a few products of trees, where multiplicativity matters
        small = [t for n in (1, 2) for t in all_trees(n, d)]
        for a in small:
            for b in small:
                failures += [(repr(a) + repr(b), x) for x in _tree_axioms(Forest([a, b]))]
        detail = f"{n_trees} trees, {n_words} words, {len(failures)} failures"
        return not failures, detail, {"failures": [list(map(str, f)) for f in failures[:20]]}

    return _timed("hopf suite (coassociativity, antipode, theta)", run)


def cherry_example() -> Check:
    def run():
        a, b, c = 1, 2, 3
        t = tree(a, tree(b), tree(c))
        T = Forest([t])
        expected = LinearCombination([
            ((T, UNIT), 1),
            ((UNIT, T), 1),
            ((Forest([tree(a, tree(b))]), Forest([tree(c)])), 1),
            ((Forest([tree(a, tree(c))]), Forest([tree(b)])), 1),
            ((Forest([tree(a)]), Forest([tree(b), tree(c)])), 1),
        ])
        got = coproduct(t)
        th = theta(t)
        th_expected = LinearCombination([((a, b, c), 1), ((a, c, b), 1)])
        ok = got == expected and len(got) == 5 and th == th_expected
        return ok, f"coproduct terms={len(got)}, theta={th}", {}

    return _timed("cherry coproduct and theta", run)


# ------------------------------------------------------------------ Fourier normal ordering

def _sector_path(freqs) -> PathModel:
    # coordinate p has derivative exp(i w_p x)
    return PathModel(tuple(((w, 1 / (1j * w)),) for w in freqs))


def permutation_oracle(max_n: int = 4, s: float = 0.1, t: float = 0.9, tol: float = 1e-8) -> Check:
    def run():
        freqs = [1.13, -2.71, 0.67, 3.37]
        worst = 0.0
        count = 0
        for n in range(1, max_n + 1):
            path = _sector_path(freqs[:n])
            word = tuple(range(1, n + 1))
            direct = iterated_integral_quadrature(path, word, s, t, nodes=32)
            for sigma in permutations(range(1, n + 1)):
                # label r integrates at position sigma[r-1]
                xi = {r: freqs[sigma[r - 1] - 1] for r in range(1, n + 1)}
                val = sum(float(c) * forest_integral(f, xi, s, t) for f, c in permutation_graph(n, sigma).items())
                worst = max(worst, abs(val - direct))
                count += 1
        p = default_path()
        for n in range(1, max_n + 1):
            for w in all_words(n, 2):
                worst = max(worst, abs(reordered_integral(p, w, s, t) - iterated_integral_quadrature(p, w, s, t, nodes=32)))
                count += 1
        g = permutation_graph(3, (2, 3, 1))
        expected = LinearCombination([
            (Forest([tree(1, tree(2)), tree(3)]), 1),
            (Forest([tree(1, tree(2), tree(3))]), -1),
        ])
        structural = g == expected
        ok = worst < tol and structural
        return ok, f"{count} integrals, max residual {worst:.2e}, T^(2,3,1) two-term match={structural}", {
            "max_residual": worst}

    return _timed("permutation-graph oracle", run)


def rough_path_properties(max_total: int = 4, n_triples: int = 50, seed: int = 0, tol: float = 1e-10) -> Check:
    def run():
        rng = np.random.default_rng(seed)
        triples = [tuple(sorted(rng.uniform(0.0, 1.0, 3))) for _ in range(n_triples)]
        triples = [(s, u, t) for s, u, t in triples]
        times = [(s, t) for s, _, t in triples]
        path = default_path()
        words = [w for n in range(1, max_total + 1) for w in all_words(n, 2)]
        pairs = word_pairs(max_total, 2)
        worst = {}
        for td in (MockData(1), SkeletonData()):
            worst[f"{td.name}-chen"] = verify_chen(td, path, words, triples)["max_residual"]
            worst[f"{td.name}-shuffle"] = verify_shuffle(td, path, pairs, times)["max_residual"]
        ok = all(v < tol for v in worst.values())
        return ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), worst

    return _timed("Chen and shuffle for tree data", run)


# ------------------------------------------------------------------ diagrams

EXPECTED_OMEGA = {
    1: {4: DivergenceDegree(-1, -4), 3: DivergenceDegree(-4, -8), 2: DivergenceDegree(-1, -8),
        1: DivergenceDegree(1, -8)},
    2: {4: DivergenceDegree(-1, -2), 3: DivergenceDegree(-2, -6), 2: DivergenceDegree(-2, -8),
        1: DivergenceDegree(1, -8)},
}


def omega_examples() -> Check:
    def run():
        got = {}
        ok = True
        for which in (1, 2):
            h, mu = example_attribution(which)
            w = omega_star_by_scale(h, mu)
            got[which] = {j: str(v) for j, v in sorted(w.items(), reverse=True)}
            ok &= w == EXPECTED_OMEGA[which]
        return ok, "; ".join(f"ex{k}: " + ", ".join(v.values()) for k, v in got.items()), got

    return _timed("omega* on the worked examples", run)


def forest_machinery(n_random: int = 20, seed: int = 0) -> Check:
    def run():
        cases = [example_attribution(1), example_attribution(2)]
        cases += checkable_diagrams(n_random, seed=seed) if n_random else []
        keys = ("idempotent", "interval", "extension_is_forest", "ext_empty_is_gn")
        bad = []
        total = 0
        for k, (h, mu) in enumerate(cases):
            r = check_forest_classification(h, mu)
            total += r["forests"]
            if not all(r[x] for x in keys):
                bad.append((k, {x: r[x] for x in keys}))
        return not bad, f"{len(cases)} diagrams, {total} forests, {len(bad)} failing", {"failing": bad}

    return _timed("forest classification", run)


# ------------------------------------------------------------------ numerics

def example_scaling(which: int, cfg: QuadratureConfig | None = None, target: float = -0.6,
                    tol: float = 0.1) -> Check:
    def run():
        c = cfg or QuadratureConfig(alpha=0.2, window=EXAMPLE_WINDOW[which])
        r = scan_example(which, c)
        ok = abs(r.slope - target) <= tol and r.used >= 6
        return ok, f"slope {r.slope:.4f} +- {r.slope_se:.4f} on {r.used} points (target {target} +- {tol})", r.to_json()

    return _timed(f"example {which} amplitude scaling", run)


def renormalization_witness(cfg: QuadratureConfig | None = None, tops=range(10, 25, 2),
                            zeta1: float = 1.5, tol: float = 0.02) -> Check:
    def run():
        c = cfg or QuadratureConfig(alpha=0.2, window=EXAMPLE_WINDOW[1])
        bare = window_growth(1, zeta1, c, tops, renormalized=False)
        ren = window_growth(1, zeta1, c, tops, renormalized=True)
        vals = [e.value for _, e in bare]
        growing = all(b > a for a, b in zip(vals, vals[1:]))
        # "without stabilizing": every added top scale still moves the bare value by far more than tol
        unstable = all(e.top_change > 10 * tol for _, e in bare)
        last = ren[-1][1].top_change
        ok = growing and unstable and last < tol
        detail = (f"bare {vals[0]:.3g} -> {vals[-1]:.3g}, min last-scale change "
                  f"{min(e.top_change for _, e in bare):.1%}; renormalized last-scale change {last:.2e}")
        return ok, detail, {"bare": [(t, e.to_json()) for t, e in bare],
                            "renormalized": [(t, e.to_json()) for t, e in ren]}

    return _timed("renormalization necessity witness", run)


HOLDER_TAUS = tuple(2.0 ** -k for k in range(2, 8))


def holder_checks(cfg: QuadratureConfig | None = None) -> Check:
    def run():
        c = cfg or QuadratureConfig(alpha=0.2)
        r1 = scan_holder((1,), c, HOLDER_TAUS)
        r2 = scan_holder((1, 2), c, HOLDER_TAUS)
        ok1 = abs(r1.slope - 2 * c.alpha) <= 0.05
        ok2 = abs(r2.slope - 4 * c.alpha) <= 0.1
        pos = all(e.value >= 0 for r in (r1, r2) for _, e in r.points)
        detail = (f"n=1 slope {r1.slope:.4f} (target {2 * c.alpha:.2f} +- 0.05), "
                  f"n=2 slope {r2.slope:.4f} (target {4 * c.alpha:.2f} +- 0.1), positive={pos}")
        return ok1 and ok2 and pos, detail, {"n1": r1.to_json(), "n2": r2.to_json()}

    return _timed("Holder variance scaling", run)


FBM_TIMES = (0.2, 0.4, 0.6, 0.8, 1.0)


def fbm_sampler_check(alphas=(0.2, 0.7), n_paths: int = 20000, seed: int = 0) -> Check:
    def run():
        res = [fbm_covariance_check(a, FBM_TIMES, n_paths, seed) for a in alphas]
        ok = all(r["pass"] for r in res)
        return ok, ", ".join(f"alpha={r['alpha']}: max z {r['max_z']:.2f}" for r in res), {
            "results": [{"alpha": r["alpha"], "max_z": r["max_z"]} for r in res]}

    return _timed("fBm covariance on a 5x5 grid", run)


# ------------------------------------------------------------------ suites

def quick_suite() -> list[Check]:
    return [hopf_suite(), cherry_example(), permutation_oracle(), rough_path_properties(), omega_examples(),
            forest_machinery(n_random=0)]


def full_suite() -> list[Check]:
    return [hopf_suite(), cherry_example(), permutation_oracle(), rough_path_properties(), omega_examples(),
            forest_machinery(), example_scaling(1), example_scaling(2), renormalization_witness(),
            holder_checks(), fbm_sampler_check()]
