import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from subperc.cli import main
from subperc.config import ExperimentConfig, load_config, parse_config_text, parse_number
from subperc.errors import ConfigError
from subperc.percolation import lower_bound_radius

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_conf(tmp_path, text, name="run.conf"):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- config parsing ---


@pytest.mark.parametrize("text,value", [("0.5", 0.5), ("1/3", 1 / 3), ("2/sqrt3", 2 / math.sqrt(3)), ("sqrt(3)", math.sqrt(3)), (" 7 ", 7.0)])
def test_parse_number(text, value):
    assert parse_number(text) == pytest.approx(value, rel=1e-15)


def test_defaults_per_experiment():
    fig1 = ExperimentConfig("fig1_patterns")
    assert fig1.boundary_mode == "torus" and "Cox(5)" in fig1.laws
    fig2 = ExperimentConfig("fig2_gilbert_scan")
    assert fig2.window().width == 40 and fig2.boundary_mode == "free"
    assert fig2.laws == ["Bin(1,1)", "Bin(2,1/2)", "Bin(3,1/3)", "Poi(1)"]


def test_parse_full_config():
    cfg = parse_config_text(
        """
        # comment
        experiment = fig2_gilbert_scan
        master_seed = 5
        generator.laws = Bin(2,1/2), Poi(1)   # trailing comment
        generator.poisson_intensity = 2/sqrt3
        scan.bracket_lo = 0.9
        scan.bracket_hi = 1.3
        sinr.include_backbone = yes
        """
    )
    assert cfg.master_seed == 5
    assert cfg.laws == ["Bin(2,1/2)", "Poi(1)"]
    assert cfg.scan_config().bracket == (0.9, 1.3)
    assert cfg.include_backbone is True
    assert cfg.poisson_intensity == pytest.approx(2 / math.sqrt(3))


def test_sinr_noise_default_gives_requested_range():
    from subperc.sinr import snr_range

    cfg = parse_config_text("experiment = sinr_gamma_scan\nsinr.range = 1.2\n")
    assert snr_range(cfg.sinr_params()) == pytest.approx(1.2, rel=1e-12)


@pytest.mark.parametrize(
    "text,match",
    [
        ("experiment = fig1_patterns\nwindow.colls = 3\n", "unknown key"),
        ("experiment = fig1_patterns\nmaster_seed = 1\nmaster_seed = 2\n", "duplicate"),
        ("experiment = fig1_patterns\nmaster_seed\n", "key = value"),
        ("experiment = fig1_patterns\nmaster_seed = x\n", "bad value"),
        ("experiment = fig9\n", "unknown experiment"),
        ("experiment = fig2_gilbert_scan\ngenerator.laws = Bin(0,1)\n", None),
        ("experiment = fig2_gilbert_scan\nscan.bracket_lo = 2\nscan.bracket_hi = 1\n", "bracket"),
        ("experiment = sinr_gamma_scan\nsinr.alpha = 2\n", "alpha"),
        ("experiment = sinr_gamma_scan\nsinr.N = 5\n", None),
        ("experiment = fig1_patterns\nwindow.boundary_mode = klein\n", None),
    ],
)
def test_config_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.conf")


@pytest.mark.parametrize("name", ["fig1_patterns", "fig2_gilbert_scan", "sinr_gamma_scan", "bounds_table", "diagnostics_suite"])
def test_shipped_configs_parse(name):
    cfg = load_config(CONFIGS / f"{name}.conf")
    assert cfg.experiment == name


# --- CLI ---


def test_cli_config_error_exit_code(tmp_path, capsys):
    conf = write_conf(tmp_path, "experiment = bounds_table\nbogus = 1\n")
    assert main(["bounds_table", "--config", str(conf), "--out", str(tmp_path / "o")]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_cli_precondition_exit_code(tmp_path, capsys):
    conf = write_conf(
        tmp_path,
        "experiment = sinr_gamma_scan\nwindow.cols = 16\nwindow.rows = 18\nsinr.range = 0.6\nscan.replications = 2\n",
    )
    assert main(["sinr_gamma_scan", "--config", str(conf), "--out", str(tmp_path / "o"), "--jobs", "1"]) == 3
    assert "gamma=0" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["status"].startswith("failed")


def test_cli_bracketing_exit_code(tmp_path, capsys):
    conf = write_conf(
        tmp_path,
        "experiment = fig2_gilbert_scan\nwindow.cols = 16\nwindow.rows = 18\ngenerator.laws = Bin(1,1)\n"
        "scan.bracket_lo = 2\nscan.bracket_hi = 3\nscan.replications = 2\n",
    )
    assert main(["fig2_gilbert_scan", "--config", str(conf), "--out", str(tmp_path / "o"), "--jobs", "1"]) == 3
    assert "bracket" in capsys.readouterr().err


def test_cli_refuses_existing_run(tmp_path):
    conf = CONFIGS / "bounds_table.conf"
    out = tmp_path / "o"
    assert main(["bounds_table", "--config", str(conf), "--out", str(out)]) == 0
    assert main(["bounds_table", "--config", str(conf), "--out", str(out)]) == 4


def test_cli_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["bounds_table", "--config", str(CONFIGS / "bounds_table.conf"), "--out", str(blocker / "sub")]) == 4


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(["fig3", "--config", "x"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main(["bounds_table", "--config", "x", "--seed", "-1"])


def test_cli_seed_override(tmp_path):
    out = tmp_path / "o"
    assert main(["fig1_patterns", "--config", str(CONFIGS / "fig1_patterns.conf"), "--out", str(out), "--seed", "99"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["master_seed"] == 99


def test_bounds_table_outputs(tmp_path):
    out = tmp_path / "b"
    assert main(["bounds_table", "--config", str(CONFIGS / "bounds_table.conf"), "--out", str(out)]) == 0
    lower = read_csv(out / "tables" / "lower_bound.csv")
    cs = [float(r["c_lambda"]) for r in lower]
    assert all(a > b for a, b in zip(cs, cs[1:]))
    for r in lower:
        assert float(r["path_base_at_c"]) == pytest.approx(1.0, abs=1e-12)
    lam = [r for r in lower if abs(float(r["lambda"]) - 2 / math.sqrt(3)) < 1e-12][0]
    assert float(lam["c_lambda"]) == pytest.approx(lower_bound_radius(2 / math.sqrt(3)), abs=1e-15)
    cross = read_csv(out / "tables" / "bounds_vs_fig2.csv")
    assert all(r["holds"] == "True" for r in cross)
    assert {r["generator"] for r in cross} == {"Bin(1,1)", "Bin(2,1/2)", "Bin(3,1/3)", "Poi(1)"}


def test_fig1_outputs(tmp_path):
    out = tmp_path / "f1"
    assert main(["fig1_patterns", "--config", str(CONFIGS / "fig1_patterns.conf"), "--out", str(out)]) == 0
    rows = {r["generator"]: r for r in read_csv(out / "tables" / "fig1_summary.csv")}
    assert list(rows) == ["lattice", "Bin(1,1)", "Bin(2,1/2)", "Bin(3,1/3)", "Poi(1)", "Cox(5)"]
    assert rows["lattice"]["points"] == rows["lattice"]["sites"] == "168"
    windows = {json.dumps(json.loads(p.read_text())["window"], sort_keys=True) for p in (out / "patterns").glob("*.json")}
    assert len(windows) == 1
    svgs = sorted(p.name for p in (out / "figures").glob("*.svg"))
    assert len(svgs) == 6
    assert (out / "figures" / "fig1_lattice.svg").read_text().count("<circle") == 168


def test_fig2_outputs_small_window(tmp_path):
    conf = write_conf(
        tmp_path,
        "experiment = fig2_gilbert_scan\nwindow.cols = 20\nwindow.rows = 24\ngenerator.laws = Bin(1,1), Poi(1)\n"
        "scan.bracket_lo = 0.8\nscan.bracket_hi = 1.5\nscan.replications = 4\n",
    )
    out = tmp_path / "f2"
    assert main(["fig2_gilbert_scan", "--config", str(conf), "--out", str(out), "--jobs", "1"]) == 0
    summary = {r["generator"]: r for r in read_csv(out / "tables" / "fig2_summary.csv")}
    for label, slug in (("Bin(1,1)", "bin_1_1"), ("Poi(1)", "poi_1")):
        assert 0.5 <= float(summary[label]["mean_fraction_at_rho_hat"]) <= 0.7
        top = [float(r["fraction"]) for r in read_csv(out / "tables" / f"fig2_top10_{slug}.csv")]
        assert len(top) == 10 and sum(top) <= 1 + 1e-12
        assert all(a >= b for a, b in zip(top, top[1:]))
        svg = (out / "figures" / f"fig2_{slug}.svg").read_text()
        assert 'class="hl"' in svg and 'class="bar first"' in svg
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert set(manifest["seeds"]) == {"fig2/Bin(1,1)", "fig2/Poi(1)"}
    assert all((out / rel).exists() for rel in manifest["outputs"])


def _run_twice(tmp_path, experiment, conf, jobs=("1", "2")):
    outs = []
    for k, j in enumerate(jobs):
        out = tmp_path / f"{experiment}_{k}"
        assert main([experiment, "--config", str(conf), "--out", str(out), "--jobs", j]) == 0
        outs.append(out)
    return outs


def _assert_identical(a, b):
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name != "manifest.json")
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file() and p.name != "manifest.json")
    assert files_a == files_b and files_a
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_sinr_rerun_byte_identical(tmp_path):
    conf = write_conf(
        tmp_path,
        "experiment = sinr_gamma_scan\nwindow.cols = 20\nwindow.rows = 24\nscan.replications = 3\nsinr.curve_points = 6\n",
    )
    a, b = _run_twice(tmp_path, "sinr_gamma_scan", conf)
    _assert_identical(a, b)
    curve = read_csv(a / "tables" / "sinr_gamma_curve_reps.csv")
    for rep in {r["replication"] for r in curve}:
        fr = [float(r["fraction"]) for r in curve if r["replication"] == rep]
        assert all(x >= y for x, y in zip(fr, fr[1:]))
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["summary"]["gamma_c"] > 0


def test_fig1_rerun_byte_identical(tmp_path):
    a, b = _run_twice(tmp_path, "fig1_patterns", CONFIGS / "fig1_patterns.conf")
    _assert_identical(a, b)


def test_manifest_reproduces_outputs(tmp_path):
    # the config echoed in the manifest regenerates the same bytes
    out = tmp_path / "m1"
    assert main(["fig1_patterns", "--config", str(CONFIGS / "fig1_patterns.conf"), "--out", str(out)]) == 0
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    from subperc.config import ExperimentConfig
    from subperc.experiments import run_experiment

    run_experiment(ExperimentConfig(**cfg), tmp_path / "m2")
    _assert_identical(out, tmp_path / "m2")


def test_console_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "subperc.cli", "bounds_table", "--config", str(CONFIGS / "bounds_table.conf"), "--out", str(tmp_path / "x")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    assert "all_hold: True" in r.stdout
