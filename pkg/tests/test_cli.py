import json
import subprocess
import sys

import pytest

from tensortrace.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def edge3(tmp_path):
    p = tmp_path / "edge.txt"
    p.write_text("2 1\n0 1 3\n")
    return str(p)


@pytest.fixture
def path_graph(tmp_path):
    p = tmp_path / "path.txt"
    p.write_text("3 2\n0 1 1.5\n1 2 0.5\n")
    return str(p)


def test_eval_single_edge(capsys, edge3):
    code, out, _ = run(capsys, "eval", "--graph", edge3, "--expr", "x1")
    assert code == 0
    doc = json.loads(out)
    assert doc["objective"] == pytest.approx(6.0, rel=1e-14)
    assert doc["eigenvalues"] == pytest.approx([0.0, 6.0], abs=1e-14)


def test_eval_matrices(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("2\n1 0\n0 2\n")
    b.write_text("2\n3 0\n0 1\n")
    code, out, _ = run(capsys, "eval", "-M", str(a), "-M", str(b), "--expr", "x1*x2")
    assert code == 0 and json.loads(out)["objective"] == 12.0
    code, out, _ = run(capsys, "eval", "-M", str(a), "--expr", "x1*x2")
    assert code == 0 and json.loads(out)["objective"] == 9.0


def test_grad_single_edge(capsys, tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("2 1\n0 1 1\n")
    code, out, _ = run(capsys, "grad", "--graph", str(p), "--expr", "x1^2", "--fd-check")
    doc = json.loads(out)
    assert code == 0
    assert doc["gradient"] == pytest.approx([8.0], rel=1e-13)
    assert doc["fd_check"]["max_rel_error"] <= 1e-5


def test_check_convexity_inverse_monomials(capsys):
    code, out, _ = run(capsys, "check", "--suite", "convexity", "--expr", "1/(x1^2*x2) + 1/(x1*x2^2)",
                       "--domain", "pos", "--trials", "50")
    docs = json.loads(out)
    assert code == 0
    assert docs[0]["property"] == "convexity" and docs[0]["failures"] == 0


def test_check_self_test_exit_3(capsys):
    code, out, _ = run(capsys, "check", "--suite", "self-test")
    assert code == 3
    assert all(d["failures"] > 0 for d in json.loads(out))


def test_optimize_budget(capsys, path_graph):
    code, out, _ = run(capsys, "optimize", "--graph", path_graph, "--expr", "x1^2", "--budget", "2",
                       "--declared-convex")
    doc = json.loads(out)
    assert code == 0
    assert doc["status"] == "converged" and doc["convexity_certified"] is True
    assert doc["weights"] == pytest.approx([1.0, 1.0], abs=1e-6)


# -- error paths -------------------------------------------------------------

def test_missing_file(capsys, tmp_path):
    code, out, err = run(capsys, "eval", "--graph", str(tmp_path / "nope.txt"), "--expr", "x1")
    assert code == 1 and out == ""
    assert "nope.txt" in err and "Traceback" not in err


def test_malformed_edge(capsys, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("3 2\n0 1 1.0\n1 x 2.0\n")
    code, _, err = run(capsys, "eval", "--graph", str(p), "--expr", "x1")
    assert code == 1
    assert f"{p}:3:" in err and "vertex" in err


def test_domain_violation(capsys, edge3):
    code, _, err = run(capsys, "eval", "--graph", edge3, "--expr", "1/(x1^2*x2) + 1/(x1*x2^2)", "--domain", "pos")
    assert code == 1
    assert "outside the domain" in err and "exclude_smallest=1" in err


def test_parse_error(capsys, edge3):
    code, _, err = run(capsys, "eval", "--graph", edge3, "--expr", "x1 +* 2")
    assert code == 1 and "^" in err


def test_bad_command_and_option(capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "eval", "--bogus")[0] == 1


def test_two_sources_rejected(capsys, edge3, tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("1\n2\n")
    code, _, err = run(capsys, "eval", "--graph", edge3, "-M", str(m), "--expr", "x1")
    assert code == 1 and "exactly one" in err


def test_optimize_precondition(capsys, path_graph):
    code, _, err = run(capsys, "optimize", "--graph", path_graph, "--expr", "1/(x1^2*x2) + 1/(x1*x2^2)",
                       "--domain", "pos", "--exclude-smallest", "1", "--budget", "2")
    assert code == 1 and "exclude_smallest" in err


# -- determinism and configuration -------------------------------------------

def test_byte_identical_output(capsys, path_graph):
    argv = ["check", "--suite", "monotone,graph-monotone", "--random", "monotone", "--seed", "9", "--trials", "20"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second and first[0] == 0
    opt = ["optimize", "--graph", path_graph, "--expr", "x1^2 + exp(-x1)", "--budget", "2"]
    assert run(capsys, *opt)[1] == run(capsys, *opt)[1]


def test_config_file_and_override(capsys, tmp_path, path_graph):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# optimizer settings\ngraph = {path_graph}\nexpr = x1^2\nbudget = 2\nmax-iter = 0\n")
    code, out, _ = run(capsys, "optimize", "--config", str(cfg))
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "iteration_cap" and doc["iterations"] == 0
    code, out, _ = run(capsys, "optimize", "--config", str(cfg), "--max-iter", "100")
    assert json.loads(out)["status"] == "converged"


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("expr = x1\nfrobnicate = 3\n")
    code, _, err = run(capsys, "eval", "--config", str(cfg))
    assert code == 1 and "frobnicate" in err


def test_threads_env(capsys, edge3, monkeypatch):
    monkeypatch.setenv("TENSORTRACE_NUM_THREADS", "2")
    code, out, _ = run(capsys, "eval", "--graph", edge3, "--expr", "x1*x2")
    assert code == 0 and json.loads(out)["objective"] == pytest.approx(36.0)
    monkeypatch.setenv("TENSORTRACE_NUM_THREADS", "zero")
    assert run(capsys, "eval", "--graph", edge3, "--expr", "x1")[0] == 1


def test_output_file(capsys, edge3, tmp_path):
    dest = tmp_path / "out.json"
    code, out, _ = run(capsys, "eval", "--graph", edge3, "--expr", "x1", "-o", str(dest))
    assert code == 0 and out == ""
    assert json.loads(dest.read_text())["objective"] == pytest.approx(6.0)


# -- bench -------------------------------------------------------------------

def test_bench_cap_rules(capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "4,64", "--repeats", "1", "--warmup", "0")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "n,m,dense_ms,eigsum_ms,ratio,fallback_ms,abs_diff"
    small, big = (ln.split(",") for ln in lines[1:])
    assert small[2] and float(small[6]) <= 1e-9
    assert big[0] == "64" and big[2] == "" and big[3]


def test_bench_three_way_at_cap(capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "8", "--m", "3", "--repeats", "1", "--warmup", "0")
    row = out.strip().splitlines()[1].split(",")
    assert code == 0 and row[0] == "8" and row[1] == "3" and row[2] != ""


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tensortrace", "check", "--suite", "self-test"],
                          capture_output=True, text=True)
    assert proc.returncode == 3
    assert json.loads(proc.stdout)
