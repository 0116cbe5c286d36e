import csv
import hashlib
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from diophdim.cli import run

TREE_FLAGS = ["--alpha", "sqrt(2),sqrt(3)", "--v", "9/5", "--s", "1/2", "--levels", "1", "--qmax", "10**5"]


def call(*argv):
    err = io.StringIO()
    status, record = run([str(a) for a in argv], stderr=err)
    return status, record, err.getvalue()


def load(path):
    return json.loads(Path(path).read_text())


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_bestapprox(tmp_path):
    out = tmp_path / "seq.json"
    status, record, _ = call("bestapprox", "--alpha", "sqrt(3)", "--qmax", "20", "--out", out)
    assert status == 0
    assert [r["q"] for r in load(out)["records"]] == [1, 3, 4, 11, 15]
    run_json = load(str(out) + ".run.json")
    assert run_json["outputs"][0]["sha256"] == sha(out)
    assert run_json["config"]["qmax"] == 20


def test_lattice_minima_and_count(tmp_path):
    seq = tmp_path / "seq.json"
    call("bestapprox", "--alpha", "sqrt(2)", "--qmax", "30", "--out", seq)
    k = [r["q"] for r in load(seq)["records"]].index(5)
    out = tmp_path / "lat.json"
    status, _, _ = call("lattice", "--seq", seq, "--k", k, "--count", "--center", "0", "--radius", "1/4", "--out", out)
    assert status == 0
    data = load(out)
    assert data["minima"]["values"] == ["1/5"]
    assert (data["count"]["lower"], data["count"]["upper"]) == (3, 3)


def test_exponents_column_with_csv(tmp_path):
    out, mirror = tmp_path / "col.json", tmp_path / "col.csv"
    status, _, _ = call("exponents", "uniform-column", "--alpha", "sqrt(2)", "--qmax", "1e4", "--out", out,
                        "--csv", mirror)
    assert status == 0
    rows = list(csv.reader(mirror.open()))
    assert rows[0] == ["q", "lo", "hi"] and len(rows) > 5
    assert "samples" in load(out)


def test_exponents_inhom_needs_beta(tmp_path):
    status, record, err = call("exponents", "inhom", "--alpha", "sqrt(2)", "--out", tmp_path / "x.json")
    assert status == 2 and record is None and "beta" in err


def test_unknown_flag_is_usage_error(tmp_path):
    status, record, err = call("bestapprox", "--alpha", "sqrt(2)", "--qmax", "9", "--out", tmp_path / "a",
                               "--bogus")
    assert status == 2 and record is None
    assert "unrecognized" in err


def test_missing_command_is_usage_error():
    assert call()[0] == 2


def test_main_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "diophdim", "bestapprox", "--nope"], capture_output=True,
                          text=True, cwd=tmp_path)
    assert proc.returncode == 2


def test_domain_error_exit_one_with_json(tmp_path):
    out = tmp_path / "r.json"
    status, record, err = call("bestapprox", "--alpha", "1/3", "--qmax", "10", "--out", out, "--error-json")
    assert status == 1
    payload = json.loads(err)
    assert payload["error"] == "RationalDependenceDetected"
    assert load(str(out) + ".run.json")["error"]["error"] == payload["error"]
    assert not out.exists()


def test_sequence_exhausted_reports_requirement(tmp_path):
    out = tmp_path / "t.json"
    flags = TREE_FLAGS[:-3] + ["2", "--qmax", "10**5"]
    status, _, err = call("cantor", "build", *flags, "--out", out, "--error-json")
    assert status == 1
    payload = json.loads(err)
    assert payload["error"] == "SequenceExhausted" and payload["required"] > 10**5


def test_cantor_build_and_verify(tmp_path):
    tree = tmp_path / "tree.json"
    assert call("cantor", "build", *TREE_FLAGS, "--out", tree)[0] == 0
    data = load(tree)
    assert set(data) >= {"config", "levels", "audit"}
    for check in ("membership", "structure", "lemma2"):
        out = tmp_path / f"{check}.json"
        status, _, _ = call("cantor", "verify", check, "--tree", tree, "--samples", "200", "--seed", "5", "--out", out)
        assert status == 0, check
    assert load(tmp_path / "structure.json")["passed"] is True
    assert load(tmp_path / "lemma2.json")["seed"] == 5


def test_dimension_command(tmp_path):
    tree, dims = tmp_path / "tree.json", tmp_path / "dims.csv"
    call("cantor", "build", *TREE_FLAGS, "--out", tree)
    assert call("dimension", "--tree", tree, "--grid-points", "6", "--out", dims)[0] == 0
    rows = list(csv.reader(dims.open()))
    assert rows[0] == ["r", "N", "logN", "log_inv_r"] and len(rows) == 7
    summary = load(tmp_path / "dims.summary.json")
    assert summary["target_s"] == "1/2" and summary["target_inv_v"] == "5/9"


def test_verify_command(tmp_path):
    seq, tree, out = tmp_path / "seq.json", tmp_path / "tree.json", tmp_path / "v.json"
    call("bestapprox", "--alpha", "sqrt(2),sqrt(3)", "--qmax", "2000", "--out", seq)
    call("cantor", "build", *TREE_FLAGS, "--out", tree)
    status, _, _ = call("verify", "--tree", tree, "--seq", seq, "--q-limit", "500", "--samples", "100", "--out", out)
    assert status == 0
    data = load(out)
    assert data["best_approximations"]["violations"] == []
    assert set(data) == {"best_approximations", "structure", "membership", "lemma2"}


def test_config_file_defaults(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": "sqrt(3)", "qmax": 20}))
    out = tmp_path / "seq.json"
    assert call("bestapprox", "--config", cfg, "--qmax", "4", "--out", out)[0] == 0
    assert [r["q"] for r in load(out)["records"]] == [1, 3, 4]


def test_bad_config_file(tmp_path):
    assert call("bestapprox", "--config", tmp_path / "missing.json", "--out", tmp_path / "x")[0] == 2


def pipeline(outdir):
    return call("pipeline", *TREE_FLAGS, "--seed", "7", "--samples", "300", "--grid-points", "8",
                "--outdir", outdir)


def test_pipeline_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert pipeline(a)[0] == 0 and pipeline(b)[0] == 0
    names = ["seq.json", "selection.json", "tree.json", "verify.json", "dims.csv", "dims.summary.json"]
    assert all((a / n).exists() for n in names)
    assert [sha(a / n) for n in names] == [sha(b / n) for n in names]
    ra, rb = load(a / "run.json"), load(b / "run.json")
    assert [o["sha256"] for o in ra["outputs"]] == [o["sha256"] for o in rb["outputs"]]
    assert ra["seed"] == 7 and ra["config"] == rb["config"] | {"outdir": ra["config"]["outdir"]}


def test_artifacts_have_no_bare_floats(tmp_path):
    pipeline(tmp_path)

    def walk(x):
        if isinstance(x, float):
            pytest.fail(f"bare float {x!r}")
        if isinstance(x, dict):
            for v in x.values():
                walk(v)
        if isinstance(x, list):
            for v in x:
                walk(v)

    for name in ("seq.json", "tree.json", "verify.json", "dims.summary.json", "selection.json"):
        walk(load(tmp_path / name))
