import json
import subprocess
import sys

import pytest

from fbmrough import __version__
from fbmrough.cli import dispatch

CHERRY = {"decoration": 1, "children": [{"decoration": 2}, {"decoration": 3}]}


@pytest.fixture
def out(tmp_path, monkeypatch):
    d = tmp_path / "out"
    monkeypatch.setenv("FBMROUGH_OUT", str(d))
    monkeypatch.chdir(tmp_path)
    return d


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_hopf_coproduct_of_cherry(out, tmp_path, capsys):
    (tmp_path / "cherry.json").write_text(json.dumps(CHERRY))
    assert dispatch(["hopf", "coproduct", "--tree", "cherry.json"]) == 0
    res = _json(capsys)
    assert res["terms"] == 5 and len(res["result"]) == 5
    assert (out / "hopf-coproduct.json").exists()
    manifest = json.loads((out / "hopf-coproduct.manifest.json").read_text())
    assert manifest["version"] == __version__ and "seed" in manifest


def test_hopf_word_operations(out, capsys):
    assert dispatch(["hopf", "shuffle", "--word", "12", "--other", "3"]) == 0
    assert len(_json(capsys)["result"]) == 3
    assert dispatch(["hopf", "antipode", "--word", "121"]) == 0
    (term,) = _json(capsys)["result"]
    assert term == {"coeff": "-1", "term": [1, 2, 1]}


def test_usage_errors_exit_2(out, capsys):
    assert dispatch(["hopf", "coproduct", "--bogus"]) == 2
    assert dispatch(["nope"]) == 2
    assert dispatch(["scan"]) == 2
    assert dispatch(["hopf", "theta", "--word", "12"]) == 2
    assert dispatch(["scan", "--target", "example1", "--window", "3-4"]) == 2
    assert "usage" in capsys.readouterr().err


def test_computation_errors_exit_1(out, capsys):
    assert dispatch(["multiscale", "predict", "--example", "1", "--alpha", "0.2"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "AlphaRangeError"


def test_fno_values(out, capsys):
    assert dispatch(["fno", "--word", "12", "--s", "0.1", "--t", "0.9"]) == 0
    res = _json(capsys)
    assert abs(complex(*res["J"]) - complex(*res["iterated_integral"])) < 1e-10
    assert res["chen"] < 1e-12 and res["shuffle"] < 1e-12


def test_fno_path_file(out, tmp_path, capsys):
    (tmp_path / "model.json").write_text(json.dumps(
        {"modes": [[{"frequency": 1.1, "amplitude": [0.5, 0.1]}], [{"frequency": 2.3, "amplitude": [0.2, -0.3]}]]}))
    assert dispatch(["fno", "--path", "model.json", "--word", "21", "--treedata", "mock", "--seed", "4"]) == 0
    res = _json(capsys)
    assert res["treedata"] == "mock" and abs(complex(*res["J_chi"]) - complex(*res["J_phi"])) < 1e-12


def test_diagram_commands(out, tmp_path, capsys):
    assert dispatch(["diagram", "forests", "--example", "1"]) == 0
    assert _json(capsys)["count"] == 22
    assert dispatch(["diagram", "render", "--example", "contracted", "--mirror"]) == 0
    assert capsys.readouterr().out.startswith("graph G")
    (tmp_path / "d.json").write_text(json.dumps({"parents": {"1": None, "2": 1}, "contractions": []}))
    assert dispatch(["diagram", "omega", "--diagram", "d.json", "--format", "csv"]) == 0
    assert capsys.readouterr().out.splitlines()[0].startswith("subgraph,")
    assert dispatch(["diagram", "renormalize", "--example", "1"]) == 0
    assert len(_json(capsys)["terms"]) == 22


def test_multiscale_commands(out, tmp_path, capsys):
    assert dispatch(["multiscale", "gn-tree", "--example", "1"]) == 0
    res = _json(capsys)
    assert res["omega_star"]["1"]["text"] == "1-8α"
    assert dispatch(["multiscale", "classify", "--example", "2"]) == 0
    assert _json(capsys)["summary"]["interval"] is True
    (tmp_path / "mu.json").write_text(json.dumps({"zeta1": 0, "zeta2": 1, "xi1": 2, "xi2": 1}))
    (tmp_path / "d.json").write_text(json.dumps({"parents": {"1": None, "2": 1}}))
    assert dispatch(["multiscale", "gn-tree", "--diagram", "d.json", "--scales", "mu.json", "--format", "dot"]) == 0
    assert capsys.readouterr().out.startswith("digraph GN")


def test_config_precedence(out, tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"alpha": 0.25, "scan": {"alpha": 0.3, "samples": 3000}}))
    assert dispatch(["scan", "--config", "c.json", "--target", "holder-n1", "--alpha", "0.35"]) == 0
    assert _json(capsys)["alpha"] == 0.35
    assert dispatch(["scan", "--config", "c.json", "--target", "holder-n1"]) == 0
    assert _json(capsys)["alpha"] == 0.3
    manifest = json.loads((out / "scan-holder-n1.manifest.json").read_text())
    assert manifest["config"]["samples"] == 3000


def test_scan_reruns_are_byte_identical(out, capsys):
    args = ["scan", "--target", "holder-n2", "--samples", "4000", "--seed", "9"]
    assert dispatch(args + ["--out", "a.csv"]) == 0
    assert dispatch(args + ["--out", "b.csv", "--threads", "3"]) == 0
    capsys.readouterr()
    a, b = (out.parent / "a.csv").read_bytes(), (out.parent / "b.csv").read_bytes()
    assert a == b
    assert a.decode().splitlines()[0] == "abscissa,estimate,stderr"
    assert len(a.decode().splitlines()) == 7


def test_fbm_cov_scan(out, capsys):
    assert dispatch(["scan", "--target", "fbm-cov", "--samples", "2000", "--window=-8:10"]) == 0
    res = _json(capsys)
    assert abs(res["slope"] - 0.4) < 0.1
    assert (out / "scan-fbm-cov.csv").exists()


def test_verify_quick(out, capsys):
    assert dispatch(["verify", "--quick", "--format", "csv"]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and text.strip().endswith("ALL PASS")


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fbmrough.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
