import json

import numpy as np
import pytest

from permlab import cli
from permlab.reduction import calibrated_gamma, default_box


def write(path, text):
    path.write_text(text)
    return str(path)


def matrix_file(tmp_path, M, name="m.txt"):
    rows = "\n".join(" ".join(repr(float(x)) for x in row) for row in M)
    return write(tmp_path / name, f"{len(M)}\n{rows}\n")


def dilution_job(**kw):
    job = {"Wp": [[1, 1], [0, 1]], "pipeline": "dilution", "n": 8, "k": 2, "box": default_box("dilution", 8, 2), "num_points": 5}
    job.update(kw)
    return job


# permanent


def test_permanent_identity(tmp_path, capsys):
    assert cli.main(["permanent", matrix_file(tmp_path, np.eye(4))]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "1.0"
    assert out[1] == "per^2: 1.0" and out[2].startswith("algorithm: ryser")


def test_permanent_all_ones(tmp_path, capsys):
    assert cli.main(["permanent", matrix_file(tmp_path, np.ones((5, 5))), "--algorithm", "naive"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "120.0"


def test_permanent_json_format(tmp_path, capsys):
    path = write(tmp_path / "m.json", json.dumps({"matrix": [[1, 2], [3, 4]]}))
    assert cli.main(["permanent", path]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "10.0"


@pytest.mark.parametrize(
    "text,line",
    [("3\n1 0 0\n0 1\n0 0 1\n", 3), ("2\n1 0\n0 x\n", 3), ("two\n1 0\n0 1\n", 1), ("3\n1 0 0\n0 1 0\n", 4)],
)
def test_permanent_malformed_names_line(tmp_path, capsys, text, line):
    assert cli.main(["permanent", write(tmp_path / "bad.txt", text)]) != 0
    assert f"line {line}:" in capsys.readouterr().err


# reduce


def test_reduce_exact_dilution(tmp_path, capsys):
    cfg = write(tmp_path / "job.json", json.dumps(dilution_job(min_success_rate=1.0)))
    out = tmp_path / "runs"
    assert cli.main(["reduce", "--config", cfg, "--seeds", "0:10", "--out", str(out)]) == 0
    summary = json.loads((out / "reduce-summary.json").read_text())
    assert summary["success_rate"] == 1.0 and summary["runs"] == 10
    assert summary["median_relative_error"] < 1e-6
    assert sorted(p.name for p in out.glob("reduce-*.json"))[:2] == ["reduce-0.json", "reduce-1.json"]
    assert (out / "reduce-summary.manifest.json").exists()
    assert "success rate 1.000" in capsys.readouterr().out


def test_reduce_missing_box(tmp_path, capsys):
    job = dilution_job()
    del job["box"]
    cfg = write(tmp_path / "job.json", json.dumps(job))
    assert cli.main(["reduce", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "box: required" in capsys.readouterr().err


def test_reduce_unknown_oracle_field(tmp_path, capsys):
    cfg = write(tmp_path / "job.json", json.dumps(dilution_job(oracle={"sigma": 1})))
    assert cli.main(["reduce", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "oracle.sigma: unknown field" in capsys.readouterr().err


def test_reduce_fails_below_min_rate(tmp_path):
    job = dilution_job(oracle={"gamma": 0.5, "gamma_is_relative": True, "seed": 1}, min_success_rate=1.0, success_rtol=1e-6, fit_mode="exhaustive", num_points=9)
    cfg = write(tmp_path / "job.json", json.dumps(job))
    assert cli.main(["reduce", "--config", cfg, "--seeds", "3", "--out", str(tmp_path)]) == 1


def test_reduce_magnification_calibrated(tmp_path):
    job = {
        "Wp": [[1, 1], [1, 1]], "pipeline": "magnification", "n": 10, "k": 2,
        "box": default_box("magnification", 10, 2), "num_points": 24, "fit_mode": "exhaustive",
        "oracle": {"gamma": calibrated_gamma("magnification", 10)}, "min_success_rate": 0.9,
    }
    cfg = write(tmp_path / "job.json", json.dumps(job))
    assert cli.main(["reduce", "--config", cfg, "--seeds", "0:100", "--out", str(tmp_path), "--threads", "4"]) == 0


# experiment


def test_experiment_moments(tmp_path, capsys):
    cfg = write(tmp_path / "m.json", json.dumps({"n": 8, "m": 256, "trials": 10000}))
    assert cli.main(["experiment", "moments", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "moments-0.json").read_text())
    assert report["pass"] is True and report["trials"] == 10000
    assert "PASS" in capsys.readouterr().out


def test_experiment_anticoncentration_csv(tmp_path):
    grid = list(np.linspace(0, 1 / np.sqrt(10), 5))
    cfg = write(tmp_path / "a.json", json.dumps({"n": 10, "k": 5, "t_grid": grid, "trials": 30}))
    assert cli.main(["experiment", "anticoncentration", "--config", cfg, "--out", str(tmp_path), "--format", "csv"]) == 0
    rows = (tmp_path / "anticoncentration-0.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 5 * 30
    assert not (tmp_path / "anticoncentration-0.json").exists()


def test_experiment_unknown_name(tmp_path, capsys):
    assert cli.main(["experiment", "rare0", "--out", str(tmp_path)]) == 2
    assert "unknown experiment 'rare0'" in capsys.readouterr().err


def test_experiment_unknown_field(tmp_path, capsys):
    cfg = write(tmp_path / "m.json", json.dumps({"n": 2, "m": 8, "trials": 10, "bogus": 1}))
    assert cli.main(["experiment", "moments", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "bogus: unknown field" in capsys.readouterr().err


def test_experiment_rare1_ones_shorthand(tmp_path):
    cfg = write(tmp_path / "r.json", json.dumps({"n": 4, "t": 0.1, "B": "ones", "trials": 500}))
    assert cli.main(["experiment", "rare1", "--config", cfg, "--out", str(tmp_path)]) == 0


def test_no_overwrite_without_force(tmp_path, capsys):
    cfg = write(tmp_path / "m.json", json.dumps({"n": 2, "m": 8, "trials": 100}))
    args = ["experiment", "moments", "--config", cfg, "--out", str(tmp_path), "--seed", "5"]
    cli.main(args)
    first = (tmp_path / "moments-5.json").read_bytes()
    assert cli.main(args) == 3
    assert "--force" in capsys.readouterr().err
    assert cli.main(args + ["--force"]) in (0, 1)
    assert (tmp_path / "moments-5.json").read_bytes() == first


def test_reruns_byte_identical_across_threads(tmp_path, monkeypatch):
    cfg = write(tmp_path / "m.json", json.dumps({"n": 4, "m": 32, "trials": 3000}))
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["experiment", "moments", "--config", cfg, "--out", str(a), "--threads", "1"])
    monkeypatch.setenv("PERMLAB_THREADS", "3")
    cli.main(["experiment", "moments", "--config", cfg, "--out", str(b), "--threads", "1"])
    assert (a / "moments-0.json").read_bytes() == (b / "moments-0.json").read_bytes()
    assert (a / "moments-0.csv").read_bytes() == (b / "moments-0.csv").read_bytes()
    assert json.loads((b / "moments-0.manifest.json").read_text())["threads"] == 3


def test_parse_seeds():
    assert cli.parse_seeds("3:6") == [3, 4, 5]
    assert cli.parse_seeds("7") == [7]
    with pytest.raises(cli.CliError):
        cli.parse_seeds("5:2")


def test_env_threads_override(monkeypatch):
    monkeypatch.setenv("PERMLAB_THREADS", "6")
    assert cli.resolve_threads(1) == 6
    monkeypatch.setenv("PERMLAB_THREADS", "zero")
    with pytest.raises(cli.CliError):
        cli.resolve_threads(1)
