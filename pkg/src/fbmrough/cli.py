"""Command-line entry point.

Every run resolves its settings as flag > config file > default, prints its
result on stdout, writes the result and a manifest into the output
directory, and exits 0 on success, 1 on a computation error and 2 on a usage
error.  The config file is JSON: top-level keys apply to every subcommand,
and a key named after the subcommand (``"scan"``, ``"diagram"``, ...) holds
overrides for that subcommand only.  Keys are the long flag names with
dashes replaced by underscores.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import FbmRoughError
from .checks import FBM_TIMES, HOLDER_TAUS, full_suite, quick_suite
from .feynman import HalfDiagram, bphz_renormalize, contracted_example, enumerate_forests, example_diagram
from .fno import MockData, PathModel, SkeletonData, default_path, iterated_integral_quadrature, rough_path
from .fno import verify_chen, verify_shuffle
from .hopf_trees import (
    antipode,
    coproduct,
    forest_from_json,
    lc_to_json,
    parse_word,
    shuffle_product,
    theta,
    tree_to_dot,
    word_antipode,
    word_coproduct,
)
from .multiscale import (
    EXAMPLE_SCALES,
    ScaleAttribution,
    check_forest_classification,
    classify_forest,
    gn_tree,
    omega_star_by_scale,
    predict_bound,
)
from .numeric import (
    EXAMPLE_WINDOW,
    AmplitudeEstimate,
    FbmSampler,
    QuadratureConfig,
    empirical_covariance,
    fbm_covariance,
    fit_scaling,
    sample_fbm,
    scan_example,
    scan_holder,
)

OUT_ENV = "FBMROUGH_OUT"
DEFAULT_OUT = "fbmrough-out"

SCAN_TARGETS = ("example1", "example2", "holder-n1", "holder-n2", "fbm-cov")

# per-subcommand defaults; None means "decided by the subcommand"
DEFAULTS: dict[str, dict[str, Any]] = {
    "common": {"format": "json", "threads": 1, "out_dir": None},
    "hopf": {"tree": None, "word": None, "other": None},
    "fno": {"path": None, "word": "12", "s": 0.0, "t": 1.0, "treedata": "skeleton", "seed": 0, "method": "chi"},
    "diagram": {"diagram": None, "example": None, "basis": None, "limit": 100000, "mirror": False},
    "multiscale": {"diagram": None, "example": None, "scales": None, "M": 2.0, "n": 2, "n_prime": 2,
                   "alpha": 0.2, "alpha_minus": 0.15, "limit": 50000},
    "scan": {"target": None, "alpha": 0.2, "seed": 0, "samples": None, "window": None, "out": None,
             "pilot": 4, "M": 2.0},
    "verify": {"quick": False},
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=S, help="JSON config file")
    common.add_argument("--out-dir", dest="out_dir", default=S,
                        help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=("json", "csv", "dot"), default=S)
    common.add_argument("--threads", type=int, default=S, help="worker cap for Monte Carlo")

    p = argparse.ArgumentParser(prog="fbmrough", description="rough paths over fBm: algebra, diagrams, numerics")
    p.add_argument("--version", action="version", version=f"fbmrough {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("hopf", parents=[common], help="tree and shuffle Hopf algebra operations")
    h.add_argument("action", choices=("coproduct", "antipode", "theta", "shuffle"))
    h.add_argument("--tree", default=S, help="tree (or forest list) JSON file")
    h.add_argument("--word", default=S, help='word such as "121"')
    h.add_argument("--other", default=S, help="second word for shuffle")

    f = sub.add_parser("fno", parents=[common], help="rough path values from tree data")
    f.add_argument("--path", default=S, help="path model JSON (default: built-in two-mode path)")
    f.add_argument("--word", default=S)
    f.add_argument("--s", type=float, default=S)
    f.add_argument("--t", type=float, default=S)
    f.add_argument("--treedata", choices=("skeleton", "mock"), default=S)
    f.add_argument("--seed", type=int, default=S, help="seed of the mock tree data")
    f.add_argument("--method", choices=("chi", "phi"), default=S)

    d = sub.add_parser("diagram", parents=[common], help="Feynman half-diagrams")
    d.add_argument("action", choices=("build", "omega", "forests", "renormalize", "render"))
    _diagram_source(d)
    d.add_argument("--basis", default=S, help="comma separated momentum basis")
    d.add_argument("--limit", type=int, default=S, help="maximal number of forests")
    d.add_argument("--mirror", action="store_true", default=S, help="render the glued symmetric diagram")

    m = sub.add_parser("multiscale", parents=[common], help="scale attributions and forest classification")
    m.add_argument("action", choices=("gn-tree", "classify", "predict"))
    _diagram_source(m)
    m.add_argument("--scales", default=S, help="JSON file mapping line names to scales")
    m.add_argument("--M", type=float, default=S)
    m.add_argument("--n", type=int, default=S)
    m.add_argument("--n-prime", dest="n_prime", type=int, default=S)
    m.add_argument("--alpha", type=float, default=S)
    m.add_argument("--alpha-minus", dest="alpha_minus", type=float, default=S)
    m.add_argument("--limit", type=int, default=S)

    s = sub.add_parser("scan", parents=[common], help="numeric scaling scans")
    s.add_argument("--target", choices=SCAN_TARGETS, default=S)
    s.add_argument("--alpha", type=float, default=S)
    s.add_argument("--seed", type=int, default=S)
    s.add_argument("--samples", type=int, default=S, help="Monte Carlo samples (paths for fbm-cov)")
    s.add_argument("--window", default=S, help="scale window j_min:j_max (write --window=-8:10 when j_min < 0)")
    s.add_argument("--pilot", type=int, default=S)
    s.add_argument("--M", type=float, default=S)
    s.add_argument("--out", default=S, help="CSV file (default: <out-dir>/scan-<target>.csv)")

    v = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    v.add_argument("--quick", action="store_true", default=S, help="exact-algebra suites only")
    return p


def _diagram_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--diagram", default=argparse.SUPPRESS,
                   help='JSON file {"parents": {...}, "contractions": [[i, j], ...]}')
    p.add_argument("--example", choices=("1", "2", "contracted"), default=argparse.SUPPRESS)


def resolve(command: str, flags: dict, config: dict | None) -> dict:
    """Merge defaults, config file and flags, in increasing priority."""
    out = dict(DEFAULTS["common"])
    out.update(DEFAULTS[command])
    if config:
        out.update({k: v for k, v in config.items() if not isinstance(v, dict) and k in out})
        out.update({k: v for k, v in config.get(command, {}).items() if k in out})
    out.update({k: v for k, v in flags.items() if k not in ("command", "config")})
    if out["out_dir"] is None:
        out["out_dir"] = os.environ.get(OUT_ENV, DEFAULT_OUT)
    return out


def _load_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


# ------------------------------------------------------------------ commands

def _word(text: str | None, what: str = "--word") -> tuple:
    if text is None:
        raise UsageError(f"{what} is required")
    try:
        return parse_word(str(text))
    except ValueError as e:
        raise UsageError(f"bad {what}: {text!r}") from e


def cmd_hopf(cfg: dict) -> tuple[str, str]:
    action = cfg["action"]
    if cfg["tree"] is not None:
        forest = forest_from_json(_load_json(cfg["tree"]))
        if action == "shuffle":
            raise UsageError("shuffle acts on words: use --word and --other")
        if cfg["format"] == "dot":
            if len(forest.trees) != 1:
                raise UsageError("dot output needs a single tree")
            return tree_to_dot(forest.trees[0]) + "\n", "dot"
        res = {"coproduct": coproduct, "antipode": antipode, "theta": theta}[action](forest)
        return _dump({"action": action, "input": "tree", "terms": len(res), "result": lc_to_json(res)}), "json"
    w = _word(cfg["word"], "--word or --tree")
    if action == "coproduct":
        res = word_coproduct(w)
    elif action == "antipode":
        res = word_antipode(w)
    elif action == "theta":
        raise UsageError("theta needs --tree")
    else:
        res = shuffle_product(w, _word(cfg["other"], "--other"))
    return _dump({"action": action, "input": "word", "terms": len(res), "result": lc_to_json(res)}), "json"


def cmd_fno(cfg: dict) -> tuple[str, str]:
    path = PathModel.from_dict(_load_json(cfg["path"])) if cfg["path"] else default_path()
    w = _word(cfg["word"])
    if max(w, default=0) > len(path.modes):
        raise UsageError(f"word uses letter {max(w)} but the path has {len(path.modes)} coordinates")
    td = SkeletonData() if cfg["treedata"] == "skeleton" else MockData(cfg["seed"])
    s, t = float(cfg["s"]), float(cfg["t"])
    u = 0.5 * (s + t)
    chi_v = rough_path(td, path, w, s, t, method="chi").value
    phi_v = rough_path(td, path, w, s, t, method="phi").value
    out = {
        "word": list(w), "s": s, "t": t, "treedata": td.name,
        "J": _cplx(chi_v if cfg["method"] == "chi" else phi_v),
        "J_chi": _cplx(chi_v), "J_phi": _cplx(phi_v),
        "chen": verify_chen(td, path, [w], [(s, u, t)])["max_residual"],
        "shuffle": verify_shuffle(td, path, [(w[:k], w[k:]) for k in range(1, len(w))], [(s, t)])["max_residual"]
        if len(w) > 1 else 0.0,
    }
    if td.name == "skeleton":
        out["iterated_integral"] = _cplx(iterated_integral_quadrature(path, w, s, t))
    return _dump(out), "json"


def _cplx(z: complex) -> list:
    return [z.real, z.imag]


def _diagram(cfg: dict) -> HalfDiagram:
    if cfg["diagram"] is not None:
        return HalfDiagram.from_json(_load_json(cfg["diagram"]))
    ex = cfg["example"]
    if ex is None:
        raise UsageError("give --diagram FILE or --example {1,2,contracted}")
    return contracted_example() if str(ex) == "contracted" else example_diagram()


def _basis(cfg: dict):
    b = cfg.get("basis")
    if b is None:
        return None
    return [x.strip() for x in (b.split(",") if isinstance(b, str) else b) if x.strip()]


def cmd_diagram(cfg: dict) -> tuple[str, str]:
    h = _diagram(cfg)
    action = cfg["action"]
    if action == "render" or cfg["format"] == "dot":
        return h.to_dot("G", mirror=bool(cfg["mirror"])), "dot"
    if action == "build":
        free, forms = h.solve(_basis(cfg))
        out = {
            **h.to_json(),
            "lines": {n: {"kind": l.kind, "ends": list(l.ends)} for n, l in h.lines.items()},
            "free_momenta": free,
            "momenta": {n: str(f) for n, f in forms.items()},
            "loops": h.loop_count(),
            "totally_contracted": h.is_totally_contracted,
        }
        return _dump(out), "json"
    subs = h.divergent_vertex_subgraphs()
    if action == "omega":
        rows = []
        for g in [h.total] + subs:
            rows.append({
                "subgraph": g.name, "vertices": sorted(g.vertices, key=str), "lines": sorted(g.lines),
                "bilateral": h.is_bilateral(g), "divergent": h.is_divergent(g), "total": h.is_total(g),
                "omega": h.omega(g).to_json(), "omega_star": h.omega_star(g).to_json(),
            })
        if cfg["format"] == "csv":
            buf = io.StringIO()
            wr = csv.writer(buf, lineterminator="\n")
            wr.writerow(["subgraph", "bilateral", "divergent", "total", "omega", "omega_star"])
            for r in rows:
                wr.writerow([r["subgraph"], r["bilateral"], r["divergent"], r["total"],
                             r["omega"]["text"], r["omega_star"]["text"]])
            return buf.getvalue(), "csv"
        return _dump({"subgraphs": rows}), "json"
    if action == "forests":
        forests = enumerate_forests(subs, limit=int(cfg["limit"]))
        return _dump({"subgraphs": [g.name for g in subs], "count": len(forests),
                      "forests": [[g.name for g in F] for F in forests]}), "json"
    expr = bphz_renormalize(h, basis=_basis(cfg))
    return _dump(expr.to_json()), "json"


def _attribution(cfg: dict, h: HalfDiagram) -> ScaleAttribution:
    if cfg["scales"] is not None:
        raw = _load_json(cfg["scales"])
        return ScaleAttribution({k: int(v) for k, v in raw.items()}, float(cfg["M"]))
    ex = cfg["example"]
    if ex in ("1", "2", 1, 2):
        return ScaleAttribution(EXAMPLE_SCALES[int(ex)], float(cfg["M"]))
    raise UsageError("give --scales FILE (or --example 1|2 for the worked attributions)")


def cmd_multiscale(cfg: dict) -> tuple[str, str]:
    h = _diagram(cfg)
    action = cfg["action"]
    if action == "predict" and cfg["scales"] is None and cfg["example"] not in ("1", "2", 1, 2):
        mu = None
    else:
        mu = _attribution(cfg, h)
    if action == "gn-tree":
        tree = gn_tree(h, mu)
        if cfg["format"] == "dot":
            return tree.to_dot(), "dot"
        out = tree.to_json()
        out["omega_star"] = {str(j): w.to_json() for j, w in sorted(omega_star_by_scale(h, mu).items())}
        return _dump(out), "json"
    if action == "classify":
        summary = check_forest_classification(h, mu, limit=int(cfg["limit"]))
        universe = h.divergent_line_subgraphs()
        forests = enumerate_forests(universe, limit=int(cfg["limit"]))
        rows = [classify_forest(h, F, mu, universe).to_json() for F in forests]
        return _dump({"summary": summary, "forests": rows}), "json"
    pred = predict_bound(h, int(cfg["n"]), int(cfg["n_prime"]), float(cfg["alpha"]),
                         float(cfg["alpha_minus"]), mu)
    return _dump(pred.to_json()), "json"


def _window(text) -> tuple[int, int] | None:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        lo, hi = text
        return int(lo), int(hi)
    try:
        lo, hi = str(text).split(":")
        return int(lo), int(hi)
    except ValueError as e:
        raise UsageError(f"--window must look like j_min:j_max, got {text!r}") from e


def cmd_scan(cfg: dict) -> tuple[str, str, dict]:
    target = cfg["target"]
    if target is None:
        raise UsageError("--target is required")
    window = _window(cfg["window"])
    alpha = float(cfg["alpha"])
    if target == "fbm-cov":
        lo, hi = window or (-20, 60)
        sampler = FbmSampler(alpha, float(cfg["M"]), lo, hi)
        n_paths = int(cfg["samples"] or 20000)
        cfg.update(window=f"{lo}:{hi}", samples=n_paths)
        paths = sample_fbm(sampler, FBM_TIMES, n_paths, int(cfg["seed"]))
        emp, se = empirical_covariance(paths)
        pts = [(t, AmplitudeEstimate(float(emp[k, k]), float(se[k, k]), n_paths)) for k, t in enumerate(FBM_TIMES)]
        res = fit_scaling(pts, rel_cap=1.0)
        theory = {str(t): fbm_covariance(t, t, alpha) for t in FBM_TIMES}
        extra = {"target_slope": 2 * alpha, "theory": theory}
    else:
        qc = QuadratureConfig(alpha=alpha, M=float(cfg["M"]), rng_seed=int(cfg["seed"]),
                              threads=int(cfg["threads"]), pilot=int(cfg["pilot"]))
        if cfg["samples"]:
            qc = qc.with_(mc_samples=int(cfg["samples"]))
        if target in ("example1", "example2"):
            which = int(target[-1])
            qc = qc.with_(window=window or EXAMPLE_WINDOW[which])
            res = scan_example(which, qc)
            cfg.update(window=f"{qc.window[0]}:{qc.window[1]}", samples=qc.mc_samples)
            extra = {"target_slope": 1 - 8 * alpha}
        else:
            if window:
                qc = qc.with_(window=window)
            word = (1,) if target == "holder-n1" else (1, 2)
            res = scan_holder(word, qc, HOLDER_TAUS)
            cfg.update(window=f"{qc.window[0]}:{qc.window[1]}", samples=qc.mc_samples)
            extra = {"target_slope": 2 * len(word) * alpha}
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["abscissa", "estimate", "stderr"])
    for x, e in res.points:
        wr.writerow([repr(float(x)), repr(float(e.value)), repr(float(e.std_error))])
    summary = {"target": target, "alpha": alpha, "slope": res.slope, "slope_se": res.slope_se,
               "intercept": res.intercept, "points_used": res.used, **extra}
    return buf.getvalue(), "csv", summary


def cmd_verify(cfg: dict) -> tuple[str, str, bool]:
    checks = quick_suite() if cfg["quick"] else full_suite()
    ok = all(c.passed for c in checks)
    if cfg["format"] == "json":
        body = _dump({"passed": ok, "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                                               for c in checks]})
    else:
        body = "\n".join(c.line() for c in checks) + f"\n{'ALL PASS' if ok else 'SOME FAILED'}\n"
    return body, "json" if cfg["format"] == "json" else "txt", ok


# ------------------------------------------------------------------ driver

def _stem(cfg: dict) -> str:
    action = cfg.get("action") or cfg.get("target")
    return cfg["command"] + (f"-{action}" if action else "")


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / name
    p.write_text(text, encoding="utf-8")
    return p


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    flags = vars(ns)
    command = flags["command"]
    try:
        config = _load_json(flags["config"]) if "config" in flags else None
        if config is not None and not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        cfg = resolve(command, flags, config)
        if "action" in flags:
            cfg["action"] = flags["action"]
        cfg["command"] = command
        if cfg["format"] not in ("json", "csv", "dot"):
            raise UsageError(f"unknown format {cfg['format']!r}")
        out_dir = Path(cfg["out_dir"])
        status = 0
        if command == "hopf":
            text, ext = cmd_hopf(cfg)
        elif command == "fno":
            text, ext = cmd_fno(cfg)
        elif command == "diagram":
            text, ext = cmd_diagram(cfg)
        elif command == "multiscale":
            text, ext = cmd_multiscale(cfg)
        elif command == "scan":
            csv_text, _, summary = cmd_scan(cfg)
            csv_path = Path(cfg["out"]) if cfg["out"] else out_dir / f"scan-{cfg['target']}.csv"
            csv_path.parent.mkdir(parents=True, exist_ok=True)
            csv_path.write_text(csv_text, encoding="utf-8")
            summary["csv"] = str(csv_path)
            text, ext = _dump(summary), "json"
            _write(csv_path.parent, csv_path.stem + ".json", text)
        else:
            text, ext, ok = cmd_verify(cfg)
            status = 0 if ok else 1
        if command != "scan":
            _write(out_dir, f"{_stem(cfg)}.{ext}", text)
        manifest = {"command": command, "config": {k: v for k, v in sorted(cfg.items())},
                    "version": __version__, "seed": cfg.get("seed", 0)}
        _write(out_dir, f"{_stem(cfg)}.manifest.json", _dump(manifest))
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head); results are on disk
            sys.stderr.close()
        return status
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"fbmrough: error: {e}\n")
        return 2
    except (FbmRoughError, ValueError, KeyError, OSError, OverflowError) as e:
        sys.stderr.write(_dump({"error": type(e).__name__, "message": str(e), "command": command}))
        return 1


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
