import json
import math

import pytest

from layerpack.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out)


def test_count_examples(capsys):
    code, rep = report(capsys, "count", "--pattern", "1,2", "--host-shape", "2,3")
    assert code == 0
    assert rep["result"]["count"] == "6"
    assert rep["result"]["density"] == {"num": "3", "den": "5"}
    code, rep = report(capsys, "count", "--pattern-shape", "1,2", "--host-shape", "2,3")
    assert rep["result"]["count"] == "6" and rep["result"]["method"] == "layered-dp"
    _, rep = report(capsys, "count", "--pattern", "2 1", "--host", "3 2 1")
    assert rep["result"]["count"] == "3"
    _, rep = report(capsys, "count", "--pattern", "1,3,2", "--host", "1 3 2")
    assert rep["result"]["count"] == "1"


def test_count_oracle_and_nonlayered(capsys):
    _, rep = report(capsys, "count", "--pattern", "1 3 2", "--host-shape", "2,3", "--oracle")
    assert rep["result"]["method"] == "bruteforce" and rep["result"]["count"] == "6"
    _, rep = report(capsys, "count", "--pattern", "1 2", "--host", "2 3 1")
    assert rep["result"]["method"] == "bruteforce" and rep["result"]["count"] == "1"


def test_report_envelope(capsys):
    _, rep = report(capsys, "count", "--pattern", "2 1", "--host", "3 2 1")
    assert rep["schema_version"] == 1
    assert rep["tool"] == "layerpack" and rep["version"]
    assert rep["config"]["seed"] == 0
    assert "wall_clock_seconds" not in rep
    _, rep = report(capsys, "count", "--pattern", "2 1", "--host", "3 2 1", "--timing")
    assert rep["wall_clock_seconds"] >= 0


def test_validation_exit_code(capsys):
    code, out, err = run(capsys, "count", "--pattern", "1 1 2", "--host", "1 2 3")
    assert code == 2 and "1 is repeated" in err and out == ""
    code, _, err = run(capsys, "count", "--pattern", "1 x", "--host", "1 2 3")
    assert code == 2 and "column 3" in err


def test_guard_exit_code(capsys):
    code, _, err = run(capsys, "exact", "--pattern", "2,2", "--n", "30")
    assert code == 3 and "--pruned" in err
    code, _, _ = run(capsys, "count", "--pattern", "1 2", "--host", " ".join(map(str, range(1, 31))), "--oracle")
    assert code == 3


def test_optimize_examples(capsys):
    code, rep = report(capsys, "optimize", "--pattern", "2,2", "--K", "2")
    assert code == 0
    assert abs(rep["result"]["value"] - 0.375) <= 1e-10
    code, rep = report(capsys, "optimize", "--pattern", "1,2", "--sweep", "1:40", "--geometric")
    assert code == 0
    assert abs(rep["result"]["rows"][-1]["value"] - (2 * math.sqrt(3) - 3)) < 1e-3


def test_optimize_sweep_csv_positive_increments(capsys):
    code, out, err = run(capsys, "optimize", "--pattern", "13,1,2", "--sweep", "3:7", "--format", "csv", "--progress")
    assert code == 0
    lines = out.strip().splitlines()
    header = lines[0].split(",")
    inc = header.index("increment")
    assert all(float(line.split(",")[inc]) > 0 for line in lines[2:])
    assert "K=7" in err


def test_optimize_nonconvergence_exit_code(capsys):
    code, rep = report(capsys, "optimize", "--pattern", "1,2", "--K", "4", "--tol", "1e-30", "--restarts", "0")
    assert code == 5
    assert rep["result"]["converged"] is False


def test_exact_examples(capsys):
    _, rep = report(capsys, "exact", "--pattern", "2,2", "--n", "8")
    assert rep["result"]["shape"] == [4, 4] and rep["result"]["count"] == "36"
    _, rep = report(capsys, "exact", "--pattern", "1,2", "--n", "4", "--all-permutations")
    assert rep["result"]["layered_witness_present"]
    _, rep = report(capsys, "exact", "--pattern", "4,1", "--n", "20")
    _, ref = report(
        capsys,
        "count",
        "--pattern-shape",
        "4,1",
        "--host",
        "16 15 14 13 12 11 10 9 8 7 6 5 4 3 2 1 17 19 20 18",
    )
    assert ref["result"]["method"] == "bruteforce"
    assert rep["result"]["count"] == ref["result"]["count"]


def test_density_sample_embed(capsys):
    _, rep = report(capsys, "density", "--pattern", "1,2", "--lengths", "0.25,0.75", "--gradient")
    assert rep["result"]["value"] == pytest.approx(3 * 0.25 * 0.75**2)
    assert rep["result"]["gradient"] == pytest.approx([3 * 0.75**2, 6 * 0.25 * 0.75])
    _, rep = report(capsys, "sample", "--lengths", "1", "--m", "3", "--size", "2")
    assert rep["result"]["permutations"] == ["3 2 1", "3 2 1"]
    _, rep = report(capsys, "sample", "--lengths", "0.5,0.5", "--pattern", "2 1", "--trials", "20000")
    assert rep["result"]["within_4se"]
    code, out, _ = run(capsys, "embed", "--perm", "2 1 4 3", "--segments")
    assert out.splitlines()[1] == "0.0,0.5,0.5,0.0"
    code, _, _ = run(capsys, "embed", "--perm", "2 3 1")
    assert code == 2


def test_bounds_commands(capsys):
    _, rep = report(capsys, "bounds", "analysis", "--n", "13", "--tail", "2")
    assert rep["result"]["contradiction"] is True
    assert rep["result"]["A"] == {"num": "1680", "den": "1"}
    _, rep = report(capsys, "bounds", "n0", "--tail", "2", "--horizon", "60")
    assert rep["result"]["n0"] == 13
    _, rep = report(capsys, "bounds", "chain", "--n-max", "20")
    assert rep["result"]["all_hold"]
    _, rep = report(capsys, "bounds", "merge", "--pattern", "2,2")
    assert rep["result"]["K_bound"] == "33767606709282"
    code, _, err = run(capsys, "bounds", "merge", "--pattern", "2,3")
    assert code == 2 and "differ" in err
    code, _, _ = run(capsys, "bounds", "thresholds", "--pattern", "1,1", "--epsilon", "0.1")
    assert code == 2


def test_verify_only(capsys):
    code, rep = report(capsys, "verify-paper", "--only", "counterexample")
    assert code == 0
    (rec,) = rep["result"]["checks"]
    assert rec["name"] == "counterexample" and rec["holds"]
    assert len(rec["detail"]["rows"]) == 88
    code, rep = report(capsys, "verify-paper", "--only", "condprob", "--trials", "50")
    assert rep["result"]["checks"][0]["lhs"]["random_passed"] == "50/50"
    code, _, err = run(capsys, "verify-paper", "--only", "nope")
    assert code == 2


def test_determinism(capsys):
    argv = ["optimize", "--pattern", "2,1,2", "--K", "5", "--restarts", "4"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# preset\npattern = 2,2\nK = 3\nrestarts = 4\n")
    _, rep = report(capsys, "optimize", "--config", str(cfg), "--restarts", "2")
    assert rep["config"]["restarts"] == 2
    assert rep["config"]["K"] == 3
    assert rep["result"]["value"] == pytest.approx(0.375)
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    code, _, err = run(capsys, "optimize", "--config", str(bad), "--pattern", "2,2", "--K", "2")
    assert code == 2 and "colour" in err


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("LAYERPACK_THREADS", "3")
    _, rep = report(capsys, "optimize", "--pattern", "2,2", "--K", "2")
    assert rep["config"]["threads"] == 3
    _, rep = report(capsys, "optimize", "--pattern", "2,2", "--K", "2", "--threads", "1")
    assert rep["config"]["threads"] == 1


def test_output_file(tmp_path, capsys):
    path = tmp_path / "out.json"
    code, out, _ = run(capsys, "exact", "--pattern", "2,2", "--n", "6", "-o", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["result"]["count"] == "9"
