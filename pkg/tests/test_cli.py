import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from semiabc import cli
from semiabc.experiment import ConfigError, ExperimentConfig, run_experiment, run_method
from semiabc.models import get_model

OUTPUTS = ("per_dataset.csv", "metrics.csv", "table.csv", "diagnostics.jsonl", "config.json")


def _write_config(path, **kw):
    path.write_text(json.dumps(kw))
    return str(path)


@pytest.fixture
def obs_csv(tmp_path):
    x = get_model("B1").simulate([0.5], 100, np.random.default_rng(0))
    p = tmp_path / "obs.csv"
    np.savetxt(p, x, header="x", comments="", fmt="%.17g")
    return str(p)


# -- config validation --------------------------------------------------------

@pytest.mark.parametrize("cfg", [
    {"example": "B", "n_datasets": 0},
    {"example": "B", "total_sims": -5},
    {"example": "Z"},
    {"example": "A_binary", "methods": ["literature"]},
    {"example": "C", "methods": ["exact"]},
    {"example": "B", "methods": []},
    {"example": "B", "methods": ["s10", "bogus"]},
    {"example": "B", "n_obs": 50, "methods": ["s10"]},
    {"example": "B", "n_accept": 2000, "total_sims": 4000, "methods": ["alg4"]},
    {"example": "B", "n_datasets": 1.5},
    {"example": "B", "colour": "red"},
    {"n_datasets": 3},
])
def test_invalid_configs_exit_2(tmp_path, cfg, capsys):
    path = _write_config(tmp_path / "c.json", **cfg)
    assert cli.main(["experiment", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "results").exists()


def test_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text("{not json")
    assert cli.main(["experiment", "--config", str(bad)]) == 2
    assert cli.main(["experiment", "--config", str(tmp_path / "missing.json")]) == 2


def test_exact_only_for_tractable_examples(obs_csv):
    assert cli.main(["oracle", "--example", "C", "--obs", obs_csv]) == 2
    assert cli.main(["pipeline", "--example", "A_binary", "--method", "literature",
                     "--obs", obs_csv]) == 2


def test_runtime_failure_exit_1(obs_csv, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("simulator exploded")
    monkeypatch.setattr(cli, "run_method", boom)
    assert cli.main(["pipeline", "--example", "B", "--obs", obs_csv]) == 1
    assert "simulator exploded" in capsys.readouterr().err


def test_config_fields_match_dataclass():
    cfg = ExperimentConfig.from_dict({"example": "C", "methods": ["s10", "alg3", "alg4"],
                                      "seed": 4}).validate()
    assert cfg.n_datasets == 100 and cfg.total_sims == 20_000 and cfg.n_accept == 100
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(["C"])


# -- subcommands --------------------------------------------------------------

def test_oracle_subcommand(obs_csv, capsys):
    assert cli.main(["oracle", "--example", "B", "--obs", obs_csv]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["model", "log_evidence", "probability"]
    assert [r[0] for r in rows[1:]] == ["B1", "B2"]
    p = [float(r[2]) for r in rows[1:]]
    assert sum(p) == pytest.approx(1.0, abs=2e-6)
    assert all(len(r[2].split(".")[1]) == 6 for r in rows[1:])


def test_pipeline_subcommand(obs_csv, tmp_path, capsys):
    diag = tmp_path / "d.json"
    args = ["pipeline", "--example", "B", "--obs", obs_csv, "--method", "alg4",
            "--total-sims", "4000", "--n-accept", "50", "--seed", "3",
            "--diagnostics", str(diag)]
    assert cli.main(args) == 0
    first = capsys.readouterr().out
    d1 = diag.read_bytes()
    assert cli.main(args) == 0
    assert capsys.readouterr().out == first and diag.read_bytes() == d1
    assert first.splitlines()[0] == "model,probability"
    assert set(json.loads(d1)) >= {"regions", "fits", "main", "pilot"}


def test_module_entry_point(obs_csv):
    out = subprocess.run([sys.executable, "-m", "semiabc", "oracle", "--example", "B",
                          "--obs", obs_csv], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("model,")


def test_obs_file_errors(tmp_path):
    p = tmp_path / "o.csv"
    p.write_text("x\n1\nabc\n")
    assert cli.main(["oracle", "--example", "B", "--obs", str(p)]) == 2
    assert cli.main(["oracle", "--example", "B", "--obs", str(tmp_path / "nope.csv")]) == 2


# -- experiments --------------------------------------------------------------

SMALL = {"example": "B", "n_datasets": 4, "total_sims": 2000, "n_accept": 40,
         "methods": ["s10", "literature", "alg3", "alg4", "exact"], "seed": 7}


def _run_cli(tmp_path, name, extra=(), **over):
    cfg = _write_config(tmp_path / f"{name}.json", **{**SMALL, **over})
    out = tmp_path / name
    assert cli.main(["experiment", "--config", cfg, "--output-dir", str(out), *extra]) == 0
    return {f: (out / f).read_bytes() for f in OUTPUTS}


def test_experiment_outputs(tmp_path, capsys):
    files = _run_cli(tmp_path, "a")
    table = capsys.readouterr().out
    assert table.splitlines()[0] == "summary_statistics,B"
    labels = [line.split(",")[0] for line in table.splitlines()[1:]]
    assert labels == ["S10", "From literature", "From Algorithm 3", "From Algorithm 4",
                      "Posterior"]
    rows = list(csv.DictReader(files["per_dataset.csv"].decode().splitlines()))
    assert list(rows[0]) == ["dataset_id", "true_model", "method", "model", "probability"]
    assert len(rows) == 4 * 5 * 2
    assert all(len(r["probability"].split(".")[1]) == 6 for r in rows)
    assert len(files["diagnostics.jsonl"].splitlines()) == 4


def test_experiment_rerun_byte_identical(tmp_path):
    assert _run_cli(tmp_path, "a") == _run_cli(tmp_path, "b")


def test_experiment_seed_flag_overrides(tmp_path):
    a = _run_cli(tmp_path, "a", extra=["--seed", "8"])
    b = _run_cli(tmp_path, "b", seed=8)
    c = _run_cli(tmp_path, "c")
    assert a == b and a["per_dataset.csv"] != c["per_dataset.csv"]


def test_jobs_do_not_change_results(tmp_path):
    assert _run_cli(tmp_path, "a") == _run_cli(tmp_path, "b", extra=["--jobs", "2"])


def test_method_results_independent_of_other_methods(tmp_path):
    full = run_experiment(ExperimentConfig(**SMALL), write=False)
    only = run_experiment(ExperimentConfig(**{**SMALL, "methods": ["alg4"]}), write=False)
    assert np.array_equal(full.probabilities["alg4"], only.probabilities["alg4"])
    assert np.array_equal(full.truth, only.truth)


def test_run_method_exact_matches_oracle(obs_csv):
    x = np.loadtxt(obs_csv, skiprows=1)
    p, diag = run_method("exact", "B", x, seed=0)
    assert diag is None and p.sum() == pytest.approx(1.0)
