import json
import os
import shutil
import subprocess

import pytest

CLI = os.environ.get("LATREE_CLI") or shutil.which("latree")
pytestmark = pytest.mark.skipif(CLI is None, reason="latree binary not found")

QUARTET = "(1:2.5,4:1,(2:3.5,3:2):5);\n"


def run(*args, stdin=None):
    return subprocess.run([CLI, *args], input=stdin, capture_output=True, text=True)


def last_json(stderr):
    return json.loads([line for line in stderr.splitlines() if line.startswith("{")][-1])


def test_generate_then_recover(tmp_path):
    tree = tmp_path / "t.nwk"
    assert run("generate", "--n", "60", "--max-degree", "4", "--seed", "3", "-o", str(tree)).returncode == 0
    out = tmp_path / "r.nwk"
    res = run("recover", "--input", str(tree), "--truth", str(tree), "-o", str(out))
    assert res.returncode == 0, res.stderr
    stats = last_json(res.stdout + res.stderr)
    assert stats["truth_match"] is True
    assert stats["queries"] < stats["naive_pairs"]
    assert out.read_text().strip().endswith(";")


def test_recover_matrix_csv(tmp_path):
    tree = tmp_path / "q.nwk"
    tree.write_text(QUARTET)
    mat = tmp_path / "q.csv"
    assert run("generate", "--n", "4", "--seed", "1", "--format", "csv", "-o", str(mat)).returncode == 0
    res = run("recover", "--input", str(tree), "--truth", str(tree))
    assert res.returncode == 0, res.stderr
    assert last_json(res.stdout + res.stderr)["queries"] < 10
    res = run("recover", "--input", str(mat), "--kind", "matrix", "--delta", "3")
    assert res.returncode == 0, res.stderr


def test_estimate_all_pairs(tmp_path):
    tree = tmp_path / "e.nwk"
    tree.write_text("(2:0.2231435513142097)1;\n")
    samples = tmp_path / "s.csv"
    lib = pytest.importorskip("latree")
    labels, x = lib.sample_gaussian(lib.Tree.from_newick(tree.read_text()), 50000, seed=2)
    np = pytest.importorskip("numpy")
    np.savetxt(samples, x, delimiter=",", header=",".join(map(str, labels)), comments="", fmt="%.17g")
    res = run("estimate", "--input", str(samples), "--all")
    assert res.returncode == 0, res.stderr
    rows = [line.split(",") for line in res.stdout.splitlines() if line and not line.startswith("{")]
    assert rows[0] == ["a", "b", "distance", "status"]
    assert abs(float(rows[1][2]) - 0.2231435513142097) < 0.05


def test_exit_codes(tmp_path):
    assert run("generate", "--n", "1").returncode == 2
    assert run("recover", "--input", str(tmp_path / "missing.nwk")).returncode == 2
    bad = tmp_path / "bad.nwk"
    bad.write_text("((1:1,2:1")
    assert run("recover", "--input", str(bad)).returncode == 2
