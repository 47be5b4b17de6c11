import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from fbmrough.errors import AlphaRangeError, InsufficientData, NonIntegrable
from fbmrough.fno import default_path, forest_integral, trunk, verify_chen, verify_shuffle, word_pairs
from fbmrough.hopf_trees import all_words
from fbmrough.numeric import (
    AmplitudeEstimate,
    EXAMPLE_WINDOW,
    FbmSampler,
    QuadratureConfig,
    Region,
    RenormalizedData,
    example_amplitude,
    fbm_constant,
    fbm_covariance,
    fbm_covariance_check,
    fit_scaling,
    printed_constant,
    rough_path_kernel,
    sample_fbm,
    simulated_area_variance,
    stratified_integral,
    variance_J,
)


def _increment_variance(k2, alpha):
    # independent oracle: 2 k2 int_0^inf (2 - 2 cos x) x^(-1-2 alpha) dx, the tail by Fourier quadrature
    head, _ = integrate.quad(lambda x: (2 - 2 * math.cos(x)) * x ** (-1 - 2 * alpha), 0, 1, limit=200)
    smooth = 2 / (2 * alpha)  # int_1^inf 2 x^(-1-2 alpha) dx
    osc, _ = integrate.quad(lambda x: x ** (-1 - 2 * alpha), 1, math.inf, weight="cos", wvar=1.0)
    return 2 * k2 * (head + smooth - 2 * osc)


@pytest.mark.parametrize("alpha", [0.1, 0.2, 0.35, 0.7])
def test_constant_normalizes_unit_variance(alpha):
    assert _increment_variance(fbm_constant(alpha), alpha) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("alpha", [0.2, 0.4])
def test_printed_constant_gives_alpha(alpha):
    assert _increment_variance(printed_constant(alpha), alpha) == pytest.approx(alpha, rel=1e-6)


def test_sampler_paths_start_at_zero_and_are_real():
    paths = sample_fbm(FbmSampler(0.3, j_min=-6, j_max=8), [0.0, 0.5], 64, seed=3, d=2)
    assert paths.shape == (64, 2, 2)
    assert np.all(paths[:, :, 0] == 0.0)
    assert np.isrealobj(paths)


def test_sampler_covariance_small():
    res = fbm_covariance_check(0.35, [0.25, 0.5, 1.0], n_paths=4000, seed=11)
    assert res["max_z"] < 4


def test_fbm_covariance_formula():
    assert fbm_covariance(1.0, 1.0, 0.3) == pytest.approx(1.0)
    assert fbm_covariance(0.0, 0.7, 0.3) == 0.0


def test_bubble_shell_integral():
    a, M, j = 0.2, 2.0, 3
    cfg = QuadratureConfig(alpha=a, window=(j, j), mc_samples=20000)
    est = stratified_integral(lambda x: np.abs(x[:, 0]) ** (1 - 2 * a), Region(("xi",)), cfg, allow_truncation=True)
    p = 2 - 2 * a
    exact = 2 * (M ** ((j + 1) * p) - M ** (j * p)) / p
    assert abs(est.value - exact) < 3 * est.std_error + 1e-12 * exact


def test_truncation_is_reported():
    cfg = QuadratureConfig(alpha=0.2, window=(0, 6), mc_samples=5000)
    with pytest.raises(NonIntegrable):
        example_amplitude(1, 1.5, cfg, renormalized=False)
    est = example_amplitude(1, 1.5, cfg, renormalized=False, allow_truncation=True)
    assert est.boundary_fraction > cfg.boundary_tol


def test_determinism_and_thread_independence():
    cfg = QuadratureConfig(alpha=0.2, mc_samples=20000, window=(-10, 20))
    a = variance_J((1, 2), 0.0, 0.25, cfg)
    b = variance_J((1, 2), 0.0, 0.25, cfg)
    c = variance_J((1, 2), 0.0, 0.25, cfg.with_(threads=4))
    assert a == b == c
    d = variance_J((1, 2), 0.0, 0.25, cfg.with_(rng_seed=1))
    assert d.value != a.value


@given(st.sampled_from([(1,), (1, 2), (2, 1), (1, 1)]), st.floats(0.01, 1.0), st.integers(0, 5))
def test_variance_is_nonnegative(word, tau, seed):
    cfg = QuadratureConfig(alpha=0.2, mc_samples=2000, window=(-8, 18), rng_seed=seed)
    est = variance_J(word, 0.0, tau, cfg, allow_truncation=True)
    assert est.value >= 0


def test_equal_times_give_zero():
    est = variance_J((1, 2), 0.4, 0.4, QuadratureConfig())
    assert est.value == 0.0 and est.std_error == 0.0


def test_variance_level_range():
    with pytest.raises(AlphaRangeError):
        variance_J((1, 2), 0.0, 0.5, QuadratureConfig(alpha=0.5))
    with pytest.raises(ValueError):
        variance_J((1, 2, 1, 2), 0.0, 0.5, QuadratureConfig(alpha=0.1))


def test_level_one_variance():
    cfg = QuadratureConfig(alpha=0.3, mc_samples=50000)
    est = variance_J((1,), 0.2, 0.7, cfg)
    assert abs(est.value - 0.5 ** 0.6) < 3 * est.std_error


def test_bare_kernel_is_the_iterated_integral():
    x = np.array([[1.3, -0.4], [2.5, 7.1], [-3.2, 0.9]])
    K = rough_path_kernel(x, 0.1, 0.7, 0.2, renormalize=False)
    ref = [forest_integral(trunk(2), {1: a, 2: b}, 0.1, 0.7) for a, b in x]
    assert np.allclose(K, ref, atol=1e-13)


def test_bare_kernel_matches_double_quadrature():
    a, b, s, t = 1.7, -0.6, 0.0, 0.8
    re, _ = integrate.dblquad(lambda x1, x2: math.cos(a * x2 + b * x1), s, t, lambda x2: s, lambda x2: x2)
    im, _ = integrate.dblquad(lambda x1, x2: math.sin(a * x2 + b * x1), s, t, lambda x2: s, lambda x2: x2)
    K = rough_path_kernel(np.array([[a, b]]), s, t, 0.2, renormalize=False)[0]
    assert abs(K - complex(re, im)) < 1e-8


def test_renormalized_tree_data_is_a_rough_path():
    p = default_path()
    words = [w for n in (1, 2, 3) for w in all_words(n, 2)]
    for flag in (True, False):
        td = RenormalizedData(0.2, flag)
        assert verify_chen(td, p, words, [(0.1, 0.35, 0.8)])["max_residual"] < 1e-10
        assert verify_shuffle(td, p, word_pairs(3, 2), [(0.1, 0.8)])["max_residual"] < 1e-10


def test_area_variance_two_routes():
    # sector-kernel quadrature against exact iterated integrals of sampled finite-mode paths
    alpha, tau = 0.4, 0.5
    lo, hi = -6, 7
    cfg = QuadratureConfig(alpha=alpha, window=(lo, hi), mc_samples=100000)
    quad = variance_J((1, 2), 0.0, tau, cfg, renormalize=False, allow_truncation=True)
    sim = simulated_area_variance(alpha, tau, FbmSampler(alpha, j_min=lo, j_max=hi, points_per_scale=4),
                                  n_paths=6000, seed=5)
    assert abs(quad.value - sim.value) < 3 * math.hypot(quad.std_error, sim.std_error)


def _est(y, rel=0.0):
    return AmplitudeEstimate(y, abs(y) * rel if rel else 1e-12 * abs(y), 1)


def test_fit_exact_power_law():
    pts = [(x, _est(3.0 * x ** -0.6)) for x in 2.0 ** np.arange(6)]
    r = fit_scaling(pts)
    assert r.slope == pytest.approx(-0.6, abs=1e-12)
    assert r.intercept == pytest.approx(math.log(3.0), abs=1e-12)


def test_fit_noise_coverage():
    hits, n = 0, 400
    for seed in range(n):
        rng = np.random.default_rng(seed)
        pts = [(x, AmplitudeEstimate(x ** 0.8 * (1 + 0.05 * rng.standard_normal()), 0.05 * x ** 0.8, 1))
               for x in 2.0 ** np.arange(8)]
        r = fit_scaling(pts)
        hits += abs(r.slope - 0.8) <= 1.96 * r.slope_se
    assert hits / n >= 0.93


def test_fit_needs_four_points():
    pts = [(x, _est(x)) for x in (1.0, 2.0, 4.0)] + [(8.0, _est(8.0, rel=0.5))]
    with pytest.raises(InsufficientData):
        fit_scaling(pts, rel_cap=0.2)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(alpha=1.2)
    with pytest.raises(ValueError):
        QuadratureConfig(window=(3, 1))
    assert QuadratureConfig().with_(M=3.0).M == 3.0


def test_example_windows_cover_scans():
    assert EXAMPLE_WINDOW[1][0] <= 0 and EXAMPLE_WINDOW[2][1] >= 6
