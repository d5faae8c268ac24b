import csv
import json
import subprocess
import sys

import pytest

from hypermatch import affinity as aff
from hypermatch.cli import bench_paths, main, trial_seed
from hypermatch.tensor3 import ProblemDims, canonicalize, read_tensor, write_tensor


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def problem(tmp_path, capsys):
    path = tmp_path / "p.json"
    code, _, _ = run(capsys, "generate", "--n-in", 8, "--n-out", 2, "--sigma", 0.01, "--seed", 1, "--out", path)
    assert code == 0
    return path


def test_generate_valid_and_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        code, _, _ = run(capsys, "generate", "--n-in", 10, "--n-out", 0, "--sigma", 0, "--scale", 1, "--seed", 1,
                         "--out", p)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    with open(a) as fh:
        prob = aff.load_problem(fh)
    assert len(prob.source) == len(prob.target) == 10


def test_generate_stdout_and_env_seed(tmp_path, capsys, monkeypatch):
    _, explicit, _ = run(capsys, "generate", "--n-in", 5, "--seed", 7)
    monkeypatch.setenv("HYPERMATCH_SEED", "7")
    _, from_env, _ = run(capsys, "generate", "--n-in", 5)
    assert explicit == from_env
    monkeypatch.setenv("HYPERMATCH_SEED", "seven")
    assert run(capsys, "generate", "--n-in", 5)[0] == 2


@pytest.mark.parametrize("flags", [["--sigma", "-1"], ["--scale", "0"], ["--n-out", "-2"], ["--n-in", "0"]])
def test_generate_bad_flag(capsys, flags):
    code, _, err = run(capsys, "generate", "--n-in", 5, *flags)
    assert code == 2 and "error" in err


def test_usage_errors(capsys, tmp_path):
    assert run(capsys)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "solve", "--problem", tmp_path / "missing.json")[0] == 2
    assert run(capsys, "solve")[0] == 2


def test_solve_zero_tensor(tmp_path, capsys):
    path = tmp_path / "zero.txt"
    with open(path, "w") as fh:
        write_tensor(canonicalize([], ProblemDims(3, 4)), fh)
    for algo in ("bcagm3", "adapt-bcagm3+mp", "bcagm+ipfp"):
        code, out, _ = run(capsys, "solve", "--tensor", path, "--algo", algo)
        assert code == 0
        assert json.loads(out)["score"] == 0.0


def test_solve_problem_record(problem, tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    code, out, _ = run(capsys, "solve", "--problem", problem, "--algo", "adapt-bcagm3", "--trace", trace)
    assert code == 0
    rec = json.loads(out)
    assert set(rec) == {"algo", "score", "accuracy", "iterations", "alpha_final", "runtime_ms", "assignment"}
    assert 0.0 <= rec["accuracy"] <= 1.0
    assert len(rec["assignment"]) == 8
    lines = trace.read_text().splitlines()
    assert lines and all(json.loads(line) for line in lines)


def test_solve_deterministic(problem, capsys):
    recs = []
    for _ in range(2):
        code, out, _ = run(capsys, "solve", "--problem", problem, "--algo", "bcagm3", "--psi", "mp", "--adaptive")
        assert code == 0
        rec = json.loads(out)
        assert rec["algo"] == "adapt-bcagm3+mp"
        rec.pop("runtime_ms")
        recs.append(rec)
    assert recs[0] == recs[1]


def test_solve_algo_errors(problem, tmp_path, capsys):
    assert run(capsys, "solve", "--problem", problem, "--algo", "rrwhm")[0] == 2
    assert run(capsys, "solve", "--problem", problem, "--algo", "bcagm3+ipfp", "--psi", "mp")[0] == 2
    assert run(capsys, "solve", "--problem", problem, "--tensor", problem)[0] == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1 3 1\n2 1 0 1.0\n")
    assert run(capsys, "solve", "--tensor", bad)[0] == 2


def test_build_tensor_command(problem, tmp_path, capsys):
    out = tmp_path / "t.txt"
    assert run(capsys, "build-tensor", "--problem", problem, "--out", out, "--knn", 20)[0] == 0
    with open(out) as fh:
        F = read_tensor(fh)
    assert F.dims == ProblemDims(8, 10) and F.nnz > 0
    code, rec, _ = run(capsys, "solve", "--tensor", out)
    assert code == 0 and "accuracy" not in json.loads(rec)


def write_spec(tmp_path, **kw):
    spec = {"sweep": "outliers", "values": [0], "trials": 1, "solvers": ["bcagm3"],
            "base": {"n_in": 6, "sigma": 0.01}, "output": str(tmp_path / "out" / "res.csv"), "seed": 5}
    spec.update(kw)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path, spec


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_bench_single_row(tmp_path, capsys):
    path, spec = write_spec(tmp_path)
    assert run(capsys, "bench", path)[0] == 0
    main_csv, summary, comparison = bench_paths(spec["output"])
    rows = read_csv(main_csv)
    assert len(rows) == 1
    assert list(rows[0]) == ["sweep_var", "value", "trial", "seed", "algo", "score", "accuracy", "iterations",
                             "runtime_ms"]
    assert rows[0]["seed"] == str(trial_seed(5, 0, 0))
    assert len(read_csv(summary)) == 1
    assert read_csv(comparison) == []


def strip_runtime(rows):
    return [{k: v for k, v in r.items() if "runtime" not in k} for r in rows]


def test_bench_rerun_identical(tmp_path, capsys):
    path, spec = write_spec(tmp_path, sweep="deformation", values=[0.0, 0.02], trials=2,
                            solvers=["bcagm3", "adapt-bcagm3+ipfp", "pairwise-ipfp"])
    outs = []
    for _ in range(2):
        assert run(capsys, "bench", path)[0] == 0
        outs.append([strip_runtime(read_csv(p)) for p in bench_paths(spec["output"])])
    assert outs[0] == outs[1]
    rows = outs[0][0]
    assert len(rows) == 2 * 2 * 3
    assert [r["algo"] for r in rows[:3]] == ["bcagm3", "adapt-bcagm3+ipfp", "pairwise-ipfp"]
    assert all(float(r["score"]) == float(repr(float(r["score"]))) for r in rows)
    assert {r["Comparison"] for r in outs[0][2]} == {
        "bcagm3 > adapt-bcagm3+ipfp", "bcagm3 < adapt-bcagm3+ipfp", "bcagm3 = adapt-bcagm3+ipfp"}


def test_bench_adaptive_pair_never_worse(tmp_path, capsys):
    path, spec = write_spec(tmp_path, values=[5], trials=100, solvers=["bcagm3", "adapt-bcagm3"],
                            base={"n_in": 8, "sigma": 0.01})
    assert run(capsys, "bench", path)[0] == 0
    table = {r["Comparison"]: r for r in read_csv(bench_paths(spec["output"])[2])}
    assert table["bcagm3 > adapt-bcagm3"]["No."] == "0"


@pytest.mark.parametrize(
    "patch",
    [{"sweep": "rotation"}, {"values": []}, {"trials": 0}, {"solvers": ["tm"]}, {"base": {"n_in": 0}},
     {"affinity": {"knn": 0}}, {"seed": -1}],
)
def test_bench_invalid_spec(tmp_path, capsys, patch):
    path, _ = write_spec(tmp_path, **patch)
    code, _, err = run(capsys, "bench", path)
    assert code == 2 and "error" in err


def test_bench_bad_json(tmp_path, capsys):
    path = tmp_path / "spec.json"
    path.write_text("{")
    assert run(capsys, "bench", path)[0] == 2


def test_trial_seed_derivation():
    assert trial_seed(1, 0, 0) == trial_seed(1, 0, 0)
    assert len({trial_seed(1, v, t) for v in range(5) for t in range(20)}) == 100


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", "--instances", 2, "--seed", 3)
    assert code == 0
    assert out.count("PASS") == 4


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hypermatch.cli", "generate", "--n-in", "4", "--seed", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["ground_truth"] is not None
