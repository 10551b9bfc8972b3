import csv
import json
import subprocess
import sys

import pytest

from pdcomm import cli
from pdcomm.errors import ConfigError

SMALL = {
    "objective": "error",
    "nbar": "0.5",
    "m": "1",
    "eta": "1",
    "xi": "0.998",
    "sigmas": "0,0.6,1.2",
    "optimizer_grid": "4",
}


def write_cfg(path, values):
    path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()), encoding="utf-8")
    return path


def run(tmp_path, values, *extra, name="cfg"):
    cfg = write_cfg(tmp_path / f"{name}.cfg", values)
    code = cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "out"), *extra])
    return code, tmp_path / "out" / f"{name}.csv", tmp_path / "out" / f"{name}.json"


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_preset_catalogue():
    names = cli.preset_names()
    expected = ["fig2b"] + [f"fig3{c}" for c in "abc"] + [f"fig4{c}" for c in "abcdef"]
    expected += [f"fig5{c}" for c in "abcdef"] + ["figS1", "figS2", "figS3"]
    assert sorted(expected) == names
    for n in names:
        cfg = cli.build_config([cli.read_config_text(cli.preset_text(n))])
        assert cfg.objective in cli.OBJECTIVES


def test_presets_command(capsys):
    assert cli.main(["presets"]) == 0
    assert "fig2b" in capsys.readouterr().out


def test_value_parsing():
    assert cli.parse_value("m", "1-3,5") == [1, 2, 3, 5]
    assert cli.parse_value("nbar", "0:2:5") == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert cli.parse_value("refine_jumps", "no") is False
    with pytest.raises(ConfigError):
        cli.parse_value("colour", "red")
    with pytest.raises(ConfigError):
        cli.parse_value("eta", "high")


def test_layer_precedence(monkeypatch):
    preset = {"nbar": "0.5", "m": "1", "seed": "1"}
    config = {"m": "2", "seed": "2"}
    monkeypatch.setenv("PDCOMM_SEED", "3")
    monkeypatch.setenv("PDCOMM_UNRELATED_THING", "x")
    cfg = cli.build_config([preset, config, cli.env_layer(), {"eta": "0.5"}])
    assert cfg.nbar == [0.5] and cfg.m == [2] and cfg.seed == 3 and cfg.eta == 0.5
    cfg = cli.build_config([preset, config, cli.env_layer(), {"seed": "4"}])
    assert cfg.seed == 4


@pytest.mark.parametrize(
    "bad",
    [
        {"sigma_count": "0"},
        {"objective": "capacity"},
        {"eta": "1.5"},
        {"m": "0"},
        {"sigmas": "0.5,0.1"},
        {"colour": "red"},
    ],
)
def test_invalid_config_exit_code(tmp_path, bad):
    values = {k: v for k, v in SMALL.items() if k != "sigmas"} | bad
    code, _, _ = run(tmp_path, values)
    assert code == cli.EXIT_CONFIG


def test_missing_inputs_exit_code(tmp_path):
    assert cli.main(["run", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--preset", "fig99"]) == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    code, _, _ = run(tmp_path, SMALL | {"maxiter": "2"})
    assert code == cli.EXIT_NUMERIC


def test_error_sweep_columns_and_determinism(tmp_path):
    code, csv_path, json_path = run(tmp_path, SMALL)
    assert code == 0
    assert header(csv_path) == ["sigma", "pe_opt", "pe_bpsk", "pe_cm", "pe_helstrom", "a1sq", "a2sq", "betasq"]
    first = csv_path.read_bytes(), json_path.read_bytes()
    code, csv_path, json_path = run(tmp_path, SMALL)
    assert (csv_path.read_bytes(), json_path.read_bytes()) == first
    summary = json.loads(json_path.read_text())
    assert summary["n_rows"] == 3 and "jumps" in summary["results"]
    # 12 significant digits
    with open(csv_path, newline="") as fh:
        row = list(csv.reader(fh))[1]
    assert all(len(x.replace(".", "").replace("-", "").lstrip("0")) <= 12 for x in row)


def test_column_selection_and_set_flag(tmp_path):
    code, csv_path, _ = run(tmp_path, SMALL, "--set", "columns=sigma,pe_opt", "--set", "m=1,2")
    assert code == cli.EXIT_CONFIG  # pe_opt only exists for a single resolution
    code, csv_path, _ = run(tmp_path, SMALL, "--set", "columns=sigma,pe_m2", "--set", "m=1,2")
    assert code == 0 and header(csv_path) == ["sigma", "pe_m2"]


def test_compare(tmp_path, capsys):
    code, csv_path, _ = run(tmp_path, SMALL)
    assert cli.main(["compare", str(csv_path), str(csv_path)]) == 0
    assert "max_dev=0.000e+00" in capsys.readouterr().out
    rows = list(csv.reader(open(csv_path, newline="")))
    rows[2][1] = str(float(rows[2][1]) + 1e-3)
    bad = tmp_path / "bad.csv"
    with open(bad, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    assert cli.main(["compare", str(csv_path), str(bad), "--tol", "1e-6"]) == cli.EXIT_FAIL
    assert "FAIL columns: pe_opt" in capsys.readouterr().out
    assert cli.main(["compare", str(csv_path), str(bad), "--column-tol", "pe_opt=1e-2"]) == 0
    other = tmp_path / "other.csv"
    other.write_text("sigma,x\n0,1\n")
    assert cli.main(["compare", str(csv_path), str(other)]) == cli.EXIT_CONFIG


def test_warm_and_cold_sweeps_agree(tmp_path):
    values = SMALL | {"sigmas": "0:1.2:7", "baselines": "false", "optimizer_grid": "12"}
    run(tmp_path, values | {"mode": "warm"}, name="warm")
    run(tmp_path, values | {"mode": "cold"}, name="cold")
    out = tmp_path / "out"
    for p in ("warm.csv", "cold.csv"):
        assert (out / p).exists()
    code = cli.main(["compare", str(out / "warm.csv"), str(out / "cold.csv"), "--columns", "pe_opt", "--tol", "1e-6"])
    assert code == 0


def test_mi_and_rmap_objectives(tmp_path):
    code, csv_path, _ = run(tmp_path, SMALL | {"objective": "mi", "m": "1,2"})
    assert code == 0 and "mi_m2" in header(csv_path) and "mi_cm" in header(csv_path)
    code, csv_path, json_path = run(
        tmp_path, {"objective": "rmap", "nbar": "0,1", "m": "1,2", "xi": "0.998", "sigmas": "0:1.2:5"}
    )
    assert code == 0 and header(csv_path) == ["nbar", "m", "R"]
    rows = list(csv.reader(open(csv_path, newline="")))[1:]
    assert len(rows) == 4 and float(rows[0][2]) == 0.0
    assert "1" in json.loads(json_path.read_text())["results"]["power_law"]


def test_mc_bpsk_landscape_sensitivity_objectives(tmp_path):
    base = {"nbar": "1", "m": "1,3", "eta": "0.72", "xi": "0.998", "nu": "0.0036", "sigmas": "0,0.4"}
    code, csv_path, _ = run(tmp_path, base | {"objective": "mc", "n_shots": "5000", "n_runs": "3"})
    assert code == 0 and "pe_mc_std_m3" in header(csv_path)
    code, _, json_path = run(tmp_path, base | {"objective": "bpsk"})
    assert code == 0
    cross = json.loads(json_path.read_text())["results"]["homodyne_crossover"]
    assert set(cross) == {"1", "3"}
    code, csv_path, json_path = run(tmp_path, base | {"objective": "landscape", "m": "3", "landscape_points": "9"})
    assert code == 0 and len(list(open(csv_path))) == 1 + 2 * 81
    code, csv_path, _ = run(
        tmp_path, base | {"objective": "sensitivity", "m": "1", "nu_values": "0,0.01", "optimizer_grid": "4"}
    )
    assert code == 0 and header(csv_path) == ["parameter", "value", "m", "sigma", "pe", "mi"]


def test_calibration_objective(tmp_path):
    values = {"objective": "calibration", "nbar": "2", "eta": "0.72", "xi": "0.998",
              "n_bins": "500", "voltages": "0.5,1.0"}
    code, csv_path, json_path = run(tmp_path, values)
    assert code == 0
    trace = tmp_path / "out" / "cfg_trace.csv"
    assert header(trace) == ["bin_index", "true_phase", "mean_count", "estimated_phase"]
    res = json.loads(json_path.read_text())["results"]
    assert "line" in res and res["sigma_hat"] > 0


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "pdcomm.cli", "presets"], capture_output=True, text=True)
    assert out.returncode == 0 and "figS3" in out.stdout
