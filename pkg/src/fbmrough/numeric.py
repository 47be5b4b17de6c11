"""Numeric evaluation: fBm sampling, stratified amplitude integrals, variances.

Integrals over momenta use dyadic stratification: each variable's range is
cut into sign x M-adic shells ``[M^j, M^(j+1))`` and sampled log-uniformly
inside a shell.  Every stratum draws from its own counter-based stream
``Philox(key=(seed, 2*stratum + phase))``, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import gamma

from .errors import AlphaRangeError, InsufficientData, NonIntegrable
from .feynman import AmplitudeExpression, HalfDiagram, amplitude, bphz_renormalize
from .fno import TreeData, _labels, _phi_structure, skeleton_value
from .hopf_trees import DecoratedTree, Forest
from .multiscale import EXAMPLE_BASIS, example_attribution, useful_renormalize


# ------------------------------------------------------------ configuration

@dataclass(frozen=True)
class QuadratureConfig:
    alpha: float = 0.2
    M: float = 2.0
    window: tuple = (-20, 40)
    points_per_scale: int = 4
    mc_samples: int = 200_000
    pilot: int = 4
    rng_seed: int = 0
    threads: int = 1
    boundary_tol: float = 0.01
    rel_cap: float = 0.2

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.M <= 1:
            raise ValueError("M must exceed 1")
        lo, hi = self.window
        if not lo <= hi:
            raise ValueError("window must satisfy j_min <= j_max")

    def with_(self, **kw) -> "QuadratureConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class AmplitudeEstimate:
    value: float
    std_error: float
    n_samples: int
    boundary_fraction: float = 0.0
    # signed share of the topmost window shell, i.e. what the last added scale contributed
    top_shell: float = 0.0
    top_shell_error: float = 0.0

    @property
    def rel_error(self) -> float:
        return self.std_error / abs(self.value) if self.value else math.inf

    @property
    def top_change(self) -> float:
        """Relative change caused by adding the top shell to the window."""
        rest = self.value - self.top_shell
        return abs(self.top_shell / rest) if rest else math.inf

    def to_json(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_samples": self.n_samples,
                "boundary_fraction": self.boundary_fraction, "top_shell": self.top_shell,
                "top_shell_error": self.top_shell_error}


@dataclass
class ScanResult:
    points: list
    slope: float
    slope_se: float
    intercept: float
    used: int

    def to_json(self) -> dict:
        return {
            "slope": self.slope,
            "slope_se": self.slope_se,
            "intercept": self.intercept,
            "used": self.used,
            "points": [{"x": x, **e.to_json()} for x, e in self.points],
        }


def _rng(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ------------------------------------------------------------ fBm

def fbm_constant(alpha: float) -> float:
    """Squared prefactor of the harmonizable kernel giving ``Var B_t = |t|^(2 alpha)``.

    ``int (1 - cos u) u^(-1-2a) du = -Gamma(-2a) cos(pi a)`` on the half line.
    """
    return -1.0 / (4.0 * math.cos(math.pi * alpha) * gamma(-2 * alpha))


def printed_constant(alpha: float) -> float:
    """``alpha`` times :func:`fbm_constant`; with it ``Var B_1 = alpha`` instead of 1."""
    return -alpha / (4.0 * math.cos(math.pi * alpha) * gamma(-2 * alpha))


@dataclass(frozen=True)
class FbmSampler:
    """Harmonizable fBm on a truncated dyadic frequency grid.

    The positive half-line ``[M^j_min, M^(j_max+1))`` is cut into
    ``points_per_scale`` log-equal cells per scale.  Each path draws one
    frequency uniformly inside every cell together with a complex Gaussian
    weight of variance equal to the cell width, so that the covariance is the
    exact truncated integral.  Negative frequencies are the conjugates, which
    makes the paths real.
    """

    alpha: float
    M: float = 2.0
    j_min: int = -20
    j_max: int = 60
    points_per_scale: int = 8

    @property
    def edges(self) -> np.ndarray:
        n = (self.j_max - self.j_min + 1) * self.points_per_scale
        return self.M ** (self.j_min + np.arange(n + 1) / self.points_per_scale)

    def modes(self, rng: np.random.Generator, n_paths: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-path frequencies (n_paths, cells) and complex amplitudes of ``dB``."""
        e = self.edges
        lo, width = e[:-1], np.diff(e)
        xi = lo + width * rng.random((n_paths, lo.size))
        w = (rng.standard_normal((n_paths, lo.size)) + 1j * rng.standard_normal((n_paths, lo.size)))
        w *= np.sqrt(width / 2)
        amp = math.sqrt(fbm_constant(self.alpha)) * xi ** (0.5 - self.alpha) * w
        return xi, amp

    def sample(self, times: Sequence[float], n_paths: int, seed: int = 0, d: int = 1,
               chunk: int = 256) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        out = np.empty((n_paths, d, times.size))
        for i in range(d):
            for c0 in range(0, n_paths, chunk):
                m = min(chunk, n_paths - c0)
                xi, amp = self.modes(_rng(seed, (i << 32) + c0), m)
                phase = np.exp(1j * xi[:, :, None] * times[None, None, :]) - 1.0
                kern = phase / (1j * xi[:, :, None])
                out[c0:c0 + m, i, :] = 2 * np.real(np.einsum("pk,pkt->pt", amp, kern))
        return out


def sample_fbm(sampler: FbmSampler, times: Sequence[float], n_paths: int, seed: int = 0,
               d: int = 1) -> np.ndarray:
    """Paths of shape (n_paths, d, len(times))."""
    return sampler.sample(times, n_paths, seed, d)


def fbm_covariance(s: float, t: float, alpha: float) -> float:
    return 0.5 * (abs(s) ** (2 * alpha) + abs(t) ** (2 * alpha) - abs(t - s) ** (2 * alpha))


def empirical_covariance(paths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean of products ``B_s B_t`` (centred process) and its standard error."""
    x = paths[:, 0, :]
    prod_ = x[:, :, None] * x[:, None, :]
    n = x.shape[0]
    return prod_.mean(axis=0), prod_.std(axis=0, ddof=1) / math.sqrt(n)


def fbm_covariance_check(alpha: float, times: Sequence[float], n_paths: int = 20000, seed: int = 0,
                         sampler: FbmSampler | None = None) -> dict:
    sampler = sampler or FbmSampler(alpha)
    paths = sample_fbm(sampler, times, n_paths, seed)
    emp, se = empirical_covariance(paths)
    theo = np.array([[fbm_covariance(s, t, alpha) for t in times] for s in times])
    z = np.abs(emp - theo) / np.where(se > 0, se, np.inf)
    return {"alpha": alpha, "times": list(times), "empirical": emp.tolist(), "theory": theo.tolist(),
            "stderr": se.tolist(), "max_z": float(z.max()), "pass": bool(z.max() < 3)}


# ------------------------------------------------------------ stratified integration

@dataclass(frozen=True)
class Region:
    """Integration region: free variables plus optional magnitude ordering.

    ``order`` lists names (free or fixed) by strictly increasing magnitude.
    """

    variables: tuple
    fixed: Mapping[str, float] = field(default_factory=dict)
    order: tuple = ()


def _shell(x: float, M: float) -> int:
    return math.floor(math.log(abs(x), M) + 1e-12)


def _strata(region: Region, cfg: QuadratureConfig) -> list[tuple[tuple, tuple]]:
    lo, hi = cfg.window
    shells = range(lo, hi + 1)
    d = len(region.variables)
    fixed_shell = {n: _shell(v, cfg.M) for n, v in region.fixed.items()}
    pos = {n: k for k, n in enumerate(region.variables)}
    out = []
    for js in product(shells, repeat=d):
        if region.order:
            seq = [js[pos[n]] if n in pos else fixed_shell[n] for n in region.order]
            if any(a > b for a, b in zip(seq, seq[1:])):
                continue
        for signs in product((1, -1), repeat=d):
            out.append((signs, js))
    return out


def _draw(stratum, n: int, rng: np.random.Generator, M: float) -> tuple[np.ndarray, np.ndarray]:
    signs, js = stratum
    u = rng.random((n, len(js)))
    mag = M ** (np.asarray(js)[None, :] + u)
    x = mag * np.asarray(signs)[None, :]
    jac = np.prod(mag * math.log(M), axis=1)
    return x, jac


def _in_order(x: np.ndarray, region: Region) -> np.ndarray:
    if not region.order:
        return np.ones(x.shape[0], dtype=bool)
    pos = {n: k for k, n in enumerate(region.variables)}
    cols = [np.abs(x[:, pos[n]]) if n in pos else np.full(x.shape[0], abs(region.fixed[n]))
            for n in region.order]
    ok = np.ones(x.shape[0], dtype=bool)
    for a, b in zip(cols, cols[1:]):
        ok &= a < b
    return ok


def _run_phase(f, region, strata, counts, cfg, phase):
    """Per-stratum (sum, sum of squares, n) for integrand samples."""
    M = cfg.M

    def work(idx: list[int]):
        xs, jacs, owners = [], [], []
        for k in idx:
            n = counts[k]
            if n == 0:
                continue
            x, jac = _draw(strata[k], n, _rng(cfg.rng_seed, 2 * k + phase), M)
            xs.append(x)
            jacs.append(jac)
            owners.append(np.full(n, k))
        if not xs:
            return []
        x = np.concatenate(xs)
        jac = np.concatenate(jacs)
        own = np.concatenate(owners)
        val = np.zeros(x.shape[0])
        ok = _in_order(x, region)
        if ok.any():
            val[ok] = f(x[ok]) * jac[ok]
        res = []
        start = 0
        for k, xk in zip([k for k in idx if counts[k] > 0], xs):
            v = val[start:start + xk.shape[0]]
            start += xk.shape[0]
            res.append((k, v.sum(), (v * v).sum(), v.size))
        return res

    ids = list(range(len(strata)))
    size = max(1, 4096 // max(1, cfg.pilot))
    chunks = [ids[i:i + size] for i in range(0, len(ids), size)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    out = {}
    for p in parts:
        for k, s1, s2, n in p:
            out[k] = (s1, s2, n)
    return out


def _truncated_sides(region: Region, cfg: QuadratureConfig) -> tuple[list[bool], list[bool]]:
    """Whether the window, rather than a fixed variable of the ordering, bounds each variable."""
    lo, hi = cfg.window
    top, bottom = [], []
    for v in region.variables:
        if v in region.order:
            k = region.order.index(v)
            above = [_shell(region.fixed[n], cfg.M) for n in region.order[k + 1:] if n in region.fixed]
            below = [_shell(region.fixed[n], cfg.M) for n in region.order[:k] if n in region.fixed]
            top.append(not any(j <= hi for j in above))
            bottom.append(not any(j >= lo for j in below))
        else:
            top.append(True)
            bottom.append(True)
    return top, bottom


def stratified_integral(f: Callable[[np.ndarray], np.ndarray], region: Region, cfg: QuadratureConfig,
                        allow_truncation: bool = False) -> AmplitudeEstimate:
    """Integrate ``f`` over ``region`` restricted to the scale window.

    A pilot run estimates per-stratum spreads; the main budget is then spread
    in proportion to them (Neyman allocation).  Only main-run samples enter
    the estimate, except for strata whose pilot showed no spread.
    """
    strata = _strata(region, cfg)
    if not strata:
        raise NonIntegrable("no stratum intersects the region inside the window")
    pilot = _run_phase(f, region, strata, [cfg.pilot] * len(strata), cfg, 0)
    sd = np.zeros(len(strata))
    mean_p = np.zeros(len(strata))
    for k, (s1, s2, n) in pilot.items():
        m = s1 / n
        mean_p[k] = m
        sd[k] = math.sqrt(max(s2 / n - m * m, 0.0) * n / max(n - 1, 1))
    total_sd = sd.sum()
    counts = [0] * len(strata)
    if total_sd > 0:
        for k in range(len(strata)):
            if sd[k] > 0:
                counts[k] = max(2, int(round(cfg.mc_samples * sd[k] / total_sd)))
    main = _run_phase(f, region, strata, counts, cfg, 1)
    means = np.zeros(len(strata))
    var = np.zeros(len(strata))
    used = 0
    for k in range(len(strata)):
        if k in main:
            s1, s2, n = main[k]
            m = s1 / n
            means[k] = m
            var[k] = max(s2 / n - m * m, 0.0) / max(n - 1, 1)
            used += n
        else:
            means[k] = mean_p[k]
            used += cfg.pilot
    value = math.fsum(means)
    err = math.sqrt(math.fsum(var))
    lo, hi = cfg.window
    cut_top, cut_bottom = _truncated_sides(region, cfg)
    edge = [k for k, (_, js) in enumerate(strata)
            if any((j == hi and cut_top[i]) or (j == lo and cut_bottom[i]) for i, j in enumerate(js))]
    edge_sum = math.fsum(abs(means[k]) for k in edge)
    denom = math.fsum(abs(means))
    frac = edge_sum / denom if denom else 0.0
    if frac > cfg.boundary_tol and not allow_truncation:
        raise NonIntegrable(
            f"boundary shells carry {frac:.1%} of the integral; widen the window "
            "or renormalize (pass allow_truncation to report the truncated value)")
    top = [k for k in edge if any(j == hi and cut_top[i] for i, j in enumerate(strata[k][1]))]
    top_val = math.fsum(means[k] for k in top)
    top_err = math.sqrt(math.fsum(var[k] for k in top))
    return AmplitudeEstimate(value, err, used, frac, top_val, top_err)


def evaluate_amplitude(expr: AmplitudeExpression, external: Mapping[str, float], cfg: QuadratureConfig,
                       order: Sequence[str] = (), weight: Callable | None = None,
                       allow_truncation: bool = False) -> AmplitudeEstimate:
    """Integrate an amplitude over its non-external variables.

    ``external`` fixes some variables (the delta constraints are already
    resolved by the momentum basis); ``order`` optionally restricts to a
    magnitude ordering of variables, ``weight`` multiplies the integrand (it
    may vanish to cut out a region).  Both see the full variable vector.
    """
    free = tuple(v for v in expr.variables if v not in external)
    region = Region(free, dict(external), tuple(order))
    pos = [expr.variables.index(v) for v in free]
    ext_pos = [(expr.variables.index(v), float(x)) for v, x in external.items() if v in expr.variables]
    nvar = len(expr.variables)

    def f(x: np.ndarray) -> np.ndarray:
        full = np.empty((x.shape[0], nvar))
        full[:, pos] = x
        for p, val in ext_pos:
            full[:, p] = val
        out = expr.evaluate(full, cfg.alpha)
        if weight is not None:
            out = out * weight(full)
        return out

    return stratified_integral(f, region, cfg, allow_truncation)


# ------------------------------------------------------------ worked examples

def attribution_weight(h: HalfDiagram, mu, variables: Sequence[str]) -> Callable:
    """Indicator that line magnitudes respect the strict order of the scales in ``mu``."""
    _, forms = h.solve(list(variables))
    names = list(h.lines)
    mat = np.array([[float(forms[n][v]) for v in variables] for n in names])
    pairs = [(a, b) for a, na in enumerate(names) for b, nb in enumerate(names) if mu[na] < mu[nb]]
    ia = np.array([a for a, _ in pairs], dtype=int)
    ib = np.array([b for _, b in pairs], dtype=int)

    def w(full: np.ndarray) -> np.ndarray:
        mags = np.abs(full @ mat.T)
        return np.all(mags[:, ia] < mags[:, ib], axis=1).astype(float)

    return w


EXAMPLE_ORDER = {
    1: ("zeta1", "zeta2", "zeta4", "zeta3"),
    2: ("zeta2", "xi1", "zeta3", "zeta1"),
}

EXAMPLE_WINDOW = {1: (0, 24), 2: (-16, 6)}


def squared(expr: AmplitudeExpression) -> AmplitudeExpression:
    return AmplitudeExpression(expr.variables, expr.terms, expr.external, expr.conservation,
                               expr.vanishes_by_symmetry, mirror=expr)


@lru_cache(maxsize=None)
def example_expression(which: int, renormalized: bool = True) -> AmplitudeExpression:
    h, mu = example_attribution(which)
    basis = EXAMPLE_BASIS[which]
    expr = useful_renormalize(h, mu, basis) if renormalized else amplitude(h, basis)
    return squared(expr)


def example_amplitude(which: int, zeta1: float, cfg: QuadratureConfig, renormalized: bool = True,
                      allow_truncation: bool = False) -> AmplitudeEstimate:
    """``int |R A|^2`` over the scale ordering of worked example ``which``, at external ``zeta1``.

    The region is every momentum configuration whose line magnitudes are
    ordered as the example's scales; the basis variables' order is used to
    prune strata.
    """
    h, mu = example_attribution(which)
    expr = example_expression(which, renormalized)
    w = attribution_weight(h, mu, expr.variables)
    return evaluate_amplitude(expr, {"zeta1": zeta1}, cfg, EXAMPLE_ORDER[which], weight=w,
                              allow_truncation=allow_truncation)


def scan_example(which: int, cfg: QuadratureConfig, ks: Sequence[int] = range(6),
                 renormalized: bool = True) -> ScanResult:
    pts = []
    for k in ks:
        z = 1.5 * cfg.M ** k
        pts.append((z, example_amplitude(which, z, cfg, renormalized)))
    return fit_scaling(pts, cfg.rel_cap)


def window_growth(which: int, zeta1: float, cfg: QuadratureConfig, tops: Sequence[int],
                  renormalized: bool) -> list[tuple[int, AmplitudeEstimate]]:
    """Estimates as the upper end of the scale window grows."""
    out = []
    for top in tops:
        c = cfg.with_(window=(cfg.window[0], top))
        out.append((top, example_amplitude(which, zeta1, c, renormalized, allow_truncation=True)))
    return out


# ------------------------------------------------------------ renormalized tree data

def _tree_parents(tr: DecoratedTree) -> dict:
    out: dict = {}

    def walk(t: DecoratedTree, p) -> None:
        out[t.decoration] = p
        for c in t.children:
            walk(c, t.decoration)

    walk(tr, None)
    return out


@lru_cache(maxsize=None)
def _tree_renormalization(tr: DecoratedTree, renormalize: bool):
    """(expression in the zeta basis, zeta-from-label matrix, label order)."""
    parents = _tree_parents(tr)
    h = HalfDiagram(parents)
    labels = list(parents)
    basis = [f"zeta{v}" for v in labels]
    expr = bphz_renormalize(h, basis=basis) if renormalize else amplitude(h, basis)
    below = {v: {v} for v in labels}
    for v in reversed(labels):
        p = parents[v]
        if p is not None:
            below[p] |= below[v]
    rows = [labels[[f"zeta{v}" for v in labels].index(n)] for n in expr.variables]
    zmat = np.array([[1.0 if w in below[v] else 0.0 for w in labels] for v in rows])
    root = next(v for v in labels if parents[v] is None)
    return expr, zmat, labels, root


def tree_coefficients(tr: DecoratedTree, xi_by_label: Mapping[int, np.ndarray], alpha: float,
                      renormalize: bool = True) -> np.ndarray:
    """Vectorized renormalized tree coefficient (the value is this times ``exp(i t sum xi)``).

    ``i^-n / zeta_root * R A(zeta) / prod |xi|^(1/2-alpha)``; without
    renormalization this is the skeleton coefficient ``prod 1/(i zeta_v)``.
    """
    expr, zmat, labels, root = _tree_renormalization(tr, renormalize)
    xi = np.stack([np.asarray(xi_by_label[v], dtype=float) for v in labels], axis=-1)
    zeta = xi @ zmat.T
    ra = expr.evaluate(zeta, alpha)
    norm = np.prod(np.abs(xi) ** (0.5 - alpha), axis=-1)
    zr = zeta[:, expr.variables.index(f"zeta{root}")]
    return (1j) ** (-len(labels)) * ra / (zr * norm)


class RenormalizedData(TreeData):
    """Tree data obtained by the forest formula applied to each tree's half-diagram."""

    name = "renormalized"
    separable = True

    def __init__(self, alpha: float, renormalize: bool = True):
        self.alpha = float(alpha)
        self.renormalize = renormalize

    def tree_coefficient(self, tr, xi, letters):
        labs = _labels(Forest([tr]))
        c = tree_coefficients(tr, {v: np.array([xi[v]]) for v in labs}, self.alpha, self.renormalize)
        return complex(c[0])

    def __hash__(self):
        return hash(("renormalized", self.alpha, self.renormalize))

    def __eq__(self, other):
        return (isinstance(other, RenormalizedData) and other.alpha == self.alpha
                and other.renormalize == self.renormalize)


# ------------------------------------------------------------ variance of J

def _forest_coefficients(f: Forest, xi_lab: Mapping[int, np.ndarray], alpha: float, renormalize: bool):
    out = 1.0 + 0j
    for tr in f.trees:
        out = out * tree_coefficients(tr, {v: xi_lab[v] for v in _labels(Forest([tr]))}, alpha, renormalize)
    return out


def rough_path_kernel(xi: np.ndarray, s: float, t: float, alpha: float, renormalize: bool = True) -> np.ndarray:
    """Kernel ``K`` with ``J^{ts}(w) = int K(xi) prod dGamma-atoms``, positions in columns.

    Each point lies in the Fourier sector given by sorting its magnitudes;
    the sector's permutation graph is convolved through coproduct and
    antipode with the (renormalized) tree data.
    """
    xi = np.atleast_2d(xi)
    n = xi.shape[1]
    out = np.zeros(xi.shape[0], dtype=complex)
    order = np.argsort(np.abs(xi), axis=1, kind="stable")
    keys = [tuple(int(p) + 1 for p in row) for row in order]
    groups: dict[tuple, list[int]] = {}
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    for sigma, idx in groups.items():
        idx = np.array(idx)
        x = xi[idx]
        lab = {r: x[:, sigma[r - 1] - 1] for r in range(1, n + 1)}
        acc = np.zeros(idx.size, dtype=complex)
        for c, R, L in _phi_structure(n, sigma):
            fr = sum((lab[v] for v in _labels(R)), np.zeros(idx.size))
            fl = sum((lab[v] for v in _labels(L)), np.zeros(idx.size))
            cr = _forest_coefficients(R, lab, alpha, renormalize) if R.trees else 1.0
            cl = _forest_coefficients(L, lab, alpha, renormalize) if L.trees else 1.0
            acc += c * cr * cl * np.exp(1j * (t * fr + s * fl))
        out[idx] = acc
    return out


def variance_J(word: Sequence[int], s: float, t: float, cfg: QuadratureConfig,
               renormalize: bool = True, allow_truncation: bool = False) -> AmplitudeEstimate:
    """Variance of the rough path over fBm at level ``len(word)`` (1, 2 or 3).

    Distinct letters give independent noises, so the variance is the squared
    kernel norm.  A repeated letter at level 2 uses twice the norm of the
    symmetrized kernel (the contraction only shifts the mean).
    """
    word = tuple(word)
    n = len(word)
    if not 1 <= n <= 3:
        raise ValueError("levels 1 to 3 are supported")
    if n * cfg.alpha >= 1:
        raise AlphaRangeError(f"level {n} needs alpha < 1/{n}")
    if s == t:
        return AmplitudeEstimate(0.0, 0.0, 0, 0.0)
    k2 = fbm_constant(cfg.alpha)
    a = cfg.alpha
    repeated = len(set(word)) < n
    if repeated and n != 2:
        raise ValueError("repeated letters are supported at level 2 only")

    def f(x: np.ndarray) -> np.ndarray:
        w = np.prod(k2 * np.abs(x) ** (1 - 2 * a), axis=1)
        K = rough_path_kernel(x, s, t, a, renormalize)
        if repeated:
            K2 = rough_path_kernel(x[:, ::-1], s, t, a, renormalize)
            return 2 * w * np.abs(0.5 * (K + K2)) ** 2
        return w * np.abs(K) ** 2

    region = Region(tuple(f"xi{p}" for p in range(1, n + 1)))
    return stratified_integral(f, region, cfg, allow_truncation)


def scan_holder(word: Sequence[int], cfg: QuadratureConfig, taus: Sequence[float],
                renormalize: bool = True) -> ScanResult:
    pts = [(tau, variance_J(word, 0.0, tau, cfg, renormalize)) for tau in taus]
    return fit_scaling(pts, cfg.rel_cap)


def simulated_area_variance(alpha: float, tau: float, sampler: FbmSampler, n_paths: int,
                            seed: int = 0, chunk: int = 500) -> AmplitudeEstimate:
    """Variance of ``int_0^tau (B_x(2) - B_0(2)) dB_x(1)`` from sampled spectra.

    Each sampled path is a finite sum of modes, so the iterated integral is
    computed in closed form; this route shares nothing with the sector
    kernel beyond the frequency window.
    """
    vals = []
    for c0 in range(0, n_paths, chunk):
        m = min(chunk, n_paths - c0)
        xi1, a1 = sampler.modes(_rng(seed, (1 << 40) + c0), m)
        xi2, a2 = sampler.modes(_rng(seed, (2 << 40) + c0), m)
        # both signs of every mode
        f1 = np.concatenate([xi1, -xi1], axis=1)
        w1 = np.concatenate([a1, np.conj(a1)], axis=1)
        f2 = np.concatenate([xi2, -xi2], axis=1)
        w2 = np.concatenate([a2, np.conj(a2)], axis=1)
        # B_x(2) - B_0(2) = sum_l w2_l (e^{i f2_l x} - 1)/(i f2_l) ; dB(1) = sum_k w1_k e^{i f1_k x} dx
        lam = f1[:, :, None] + f2[:, None, :]
        e_lam = _e(lam, tau)
        e_f1 = _e(f1, tau)
        inner = (e_lam - e_f1[:, :, None]) / (1j * f2[:, None, :])
        v = np.einsum("pk,pl,pkl->p", w1, w2, inner)
        vals.append(v.real)
    v = np.concatenate(vals)
    return AmplitudeEstimate(float(np.mean(v * v)), float(np.std(v * v, ddof=1) / math.sqrt(v.size)), v.size)


def _e(lam: np.ndarray, tau: float) -> np.ndarray:
    """``int_0^tau exp(i lam x) dx``."""
    small = np.abs(lam * tau) < 1e-8
    safe = np.where(small, 1.0, lam)
    return np.where(small, tau + 0.5j * lam * tau * tau, (np.exp(1j * safe * tau) - 1) / (1j * safe))


# ------------------------------------------------------------ fitting

def fit_scaling(points: Sequence[tuple[float, AmplitudeEstimate]], rel_cap: float = 0.2) -> ScanResult:
    """Weighted least-squares slope of ``log y`` against ``log x``."""
    pts = list(points)
    use = [(x, e) for x, e in pts if x > 0 and e.value > 0 and e.rel_error < rel_cap]
    if len(use) < 4:
        raise InsufficientData(f"{len(use)} admissible points, need at least 4")
    lx = np.log([x for x, _ in use])
    ly = np.log([e.value for _, e in use])
    sig = np.array([max(e.rel_error, 1e-15) for _, e in use])
    w = 1 / sig ** 2
    X = np.stack([np.ones_like(lx), lx], axis=1)
    A = X.T @ (w[:, None] * X)
    beta = np.linalg.solve(A, X.T @ (w * ly))
    cov = np.linalg.inv(A)
    resid = ly - X @ beta
    dof = len(use) - 2
    chi2 = float(np.sum(w * resid ** 2))
    if dof > 0:
        cov = cov * max(1.0, chi2 / dof)
    return ScanResult(pts, float(beta[1]), float(math.sqrt(cov[1, 1])), float(beta[0]), len(use))
