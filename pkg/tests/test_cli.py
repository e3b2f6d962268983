import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from burgerslab import cli, scenarios
from burgerslab.cli import ExperimentSpec, main
from burgerslab.errors import ConfigInvalid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_spec(tmp_path, scenario, params, seed=1, name="t"):
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump({"name": name, "scenario": scenario, "parameters": params,
                                    "seed": seed, "output_dir": str(tmp_path / "unused")}))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("scenario", sorted(scenarios.CATALOG))
def test_spec_round_trip(scenario):
    spec = ExperimentSpec.load(CONFIGS / f"{scenario}.yaml")
    assert spec.scenario == scenario
    again = ExperimentSpec.from_yaml(spec.to_yaml())
    assert again == spec
    assert again.resolved() == spec.resolved()


def test_every_catalog_entry_has_a_config_and_recipe():
    assert set(scenarios.CATALOG) == set(scenarios.RECIPES)
    assert {p.stem for p in CONFIGS.glob("*.yaml")} == set(scenarios.CATALOG)


@pytest.mark.parametrize("bad", [
    {},
    {"name": "x", "scenario": "nope"},
    {"name": "x", "scenario": "fluctuation", "parameters": {"n_paths": "many"}},
    {"name": "x", "scenario": "fluctuation", "parameters": {"bogus": 1}},
    {"name": "x", "scenario": "fluctuation", "seed": -1},
    {"name": "x", "scenario": "fluctuation", "colour": "red"},
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ConfigInvalid):
        ExperimentSpec.from_dict(bad)


def test_exit_codes_for_bad_input(tmp_path):
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert main(["run", str(empty)]) == 64
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 74
    spec = write_spec(tmp_path, "fluctuation", {"n_paths": 100})
    assert main(["run", str(spec), "--jobs", "0"]) == 64


def test_list_output(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    heads = [line for line in out.splitlines() if not line.startswith(" ")]
    assert len(heads) == 7
    assert any(line.startswith("limit_measures → §4.2-§4.3") for line in heads)


def test_validate_prints_resolved_parameters(tmp_path, capsys):
    spec = write_spec(tmp_path, "fluctuation", {"n_paths": 100})
    assert main(["validate", str(spec)]) == 0
    resolved = json.loads(capsys.readouterr().out)
    assert resolved["n_paths"] == 100 and resolved["nu_viscosity"] == 0.2


def test_run_writes_artifacts(tmp_path):
    spec = write_spec(tmp_path, "anomaly_suite", {})
    out = tmp_path / "out"
    assert main(["run", str(spec), "--output-dir", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"rates.csv", "delta_psi.csv", "summary.json",
                                               "manifest.json"}
    rates = {r["entropy"]: r for r in read_csv(out / "rates.csv")}
    assert float(rates["energy"]["lagrangian_anomaly"]) == pytest.approx(-2 / 3, abs=1e-12)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["exit_status"] == 0 and summary["failures"] == []
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["backend"] in ("numba", "numpy")


def test_output_dir_env_and_seed_override(tmp_path, monkeypatch):
    spec = write_spec(tmp_path, "fluctuation", {"n_paths": 200})
    monkeypatch.setenv("BURGERSLAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(spec), "--seed", "9"]) == 0
    manifest = json.loads((tmp_path / "env" / "manifest.json").read_text())
    assert manifest["seed"] == 9


@pytest.mark.parametrize("scenario,params", [
    ("ci_fixed_point", {"n_paths": 300, "x_positions": [-0.5, 0.0, 0.3]}),
    ("fluctuation", {"n_paths": 400}),
])
def test_results_do_not_depend_on_jobs(tmp_path, scenario, params):
    spec = write_spec(tmp_path, scenario, params, seed=3)
    outs = []
    for jobs in ("1", "3"):
        out = tmp_path / f"jobs{jobs}"
        main(["run", str(spec), "--jobs", jobs, "--output-dir", str(out)])
        outs.append(out)
    csvs = sorted(p.name for p in outs[0].glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert (outs[0] / "summary.json").read_bytes() == (outs[1] / "summary.json").read_bytes()


def test_tolerance_failure_exit(tmp_path):
    spec = write_spec(tmp_path, "limit_measures", {"exponent_tolerance": 0.0, "weight_tolerance": 0.0})
    out = tmp_path / "out"
    assert main(["run", str(spec), "--output-dir", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["exit_status"] == 3
    assert all(f["kind"] == "tolerance" for f in summary["failures"])


def test_assertion_failure_exit(tmp_path, monkeypatch):
    def broken(params, seed, jobs):
        res = scenarios.Result()
        res.check(False, "assertion", "forced")
        res.check(False, "tolerance", "also forced")
        return res

    monkeypatch.setitem(scenarios.RECIPES, "fluctuation", broken)
    spec = write_spec(tmp_path, "fluctuation", {})
    assert main(["run", str(spec), "--output-dir", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "burgerslab", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "escape_sweep" in proc.stdout


def test_cell_formatting():
    import numpy as np
    assert cli.table_csv(["a", "b", "c"], [(np.float64(0.1), np.int64(3), np.bool_(True))]) == "a,b,c\n0.1,3,1\n"
