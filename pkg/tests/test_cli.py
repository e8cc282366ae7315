import json

import pytest

from lodwave.cli import ExperimentConfig, load_config, log_coupled_k, main, run_experiment

SMALL = {
    "problem_id": "MP2",
    "H_exponents": [2, 3],
    "h_exponent": 5,
    "k_values": "log-coupled",
    "k_offset": 0.5,
    "dt": 0.05,
    "T": 0.2,
}


def test_log_coupled_k():
    assert [log_coupled_k(2.0**-e, 1.0) for e in (1, 2, 3)] == [1, 2, 3]
    assert [log_coupled_k(2.0**-e, 0.5) for e in (2, 3, 4)] == [1, 2, 3]


@pytest.mark.parametrize(
    "change",
    [
        {"h_exponent": 3},
        {"dt": 0.03},
        {"k_values": [-1]},
        {"k_values": "auto"},
        {"problem_id": "MP7"},
        {"f_projection": "h1"},
        {"saddle_method": "gmres"},
        {"threads": 0},
        {"H_exponents": []},
    ],
)
def test_invalid_configs(change):
    with pytest.raises(ValueError):
        ExperimentConfig(**{**SMALL, **change})


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({**SMALL, "colour": "red"})


def test_defaults_and_ks():
    cfg = ExperimentConfig(**SMALL)
    assert cfg.J == 4
    assert cfg.ks_for(4) == [3]
    assert ExperimentConfig(**{**SMALL, "k_values": [1, 2]}).ks_for(3) == [1, 2]


def test_dry_run(tmp_path, capsys):
    path = tmp_path / "c.json"
    out = tmp_path / "never"
    path.write_text(json.dumps({**SMALL, "output_dir": str(out)}))
    assert main(["run", str(path), "--dry-run"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["plan"] == [{"H_exp": 2, "k": 1}, {"H_exp": 3, "k": 2}]
    assert not out.exists()


def test_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({**SMALL, "h_exponent": 1}))
    assert main(["run", str(path)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_stage_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({**SMALL, "problem_params": {"sigma": 1.0}, "output_dir": str(tmp_path / "o")}))
    assert main(["run", str(path)]) == 1
    assert "stage 'problem'" in capsys.readouterr().err


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("run")
    cfg = ExperimentConfig(
        **SMALL, output_dir=str(base / "a"), emit_vtk=True, corrector_cache=str(base / "cache")
    )
    return base, cfg, run_experiment(cfg)


def test_run_outputs(small_run):
    base, cfg, summary = small_run
    out = base / "a"
    errors = (out / "errors.csv").read_text().splitlines()
    assert errors[0] == "H_exp,k,e0_L2_rel,ems_L2_rel,ems_H1_rel,dtems_L2_rel,dtems_H1_rel"
    assert len(errors) == 3
    assert "eoc_average" in (out / "eoc.csv").read_text()
    assert len(list(out.glob("*.vtk"))) == 6
    assert len(list((base / "cache").glob("*.npz"))) == 2
    doc = json.loads((out / "run.json").read_text())
    assert set(doc) >= {"config", "timings", "solver_reports", "results", "coefficient_range"}
    assert summary["results"][0]["k"] == 1


def test_run_json_round_trip(small_run):
    base, cfg, _ = small_run
    assert load_config(base / "a" / "run.json") == cfg


def test_cached_rerun_identical(small_run, tmp_path):
    base, cfg, _ = small_run
    path = tmp_path / "c.json"
    path.write_text(json.dumps({**cfg.to_dict(), "emit_vtk": False}))
    assert main(["run", str(path), "--out", str(tmp_path / "b"), "--threads", "1"]) == 0
    first = (base / "a" / "errors.csv").read_bytes()
    assert (tmp_path / "b" / "errors.csv").read_bytes() == first
    doc = json.loads((tmp_path / "b" / "run.json").read_text())
    assert all("loaded_from" in v for k, v in doc["solver_reports"].items() if k.startswith("correctors"))
