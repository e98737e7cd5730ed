import json
import math

import pytest

from hawkesnet import cli
from hawkesnet.grid import GridFunction


def _run(tmp_path, *argv):
    return cli.main(list(argv) + ["--output-dir", str(tmp_path)])


def test_volterra_last_row(tmp_path):
    assert _run(tmp_path, "volterra", "--kernel", "exponential:2,1", "--mu", "1", "--T", "1", "--dt", "1e-3") == 0
    g = GridFunction.from_csv(tmp_path / "volterra.csv")
    assert g.values[-1] == pytest.approx(2 * math.e - 3, rel=1e-4)
    text = (tmp_path / "volterra.csv").read_text(encoding="utf-8")
    assert text.startswith("# hawkesnet ")
    assert "# config_sha256 " in text and "# seed 0" in text
    assert "\r" not in text


def test_extinction_runs_are_byte_identical(tmp_path):
    args = ["impulse-extinction", "--kernel", "exponential:2,1", "--replicas", "10000", "--seed", "7"]
    assert cli.main(args + ["--output-dir", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--output-dir", str(tmp_path / "b"), "--workers", "3"]) == 0
    for name in ("extinction.csv", "impulse_extinction.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unknown_flag_is_usage_error(tmp_path, capsys):
    assert _run(tmp_path, "volterra", "--no-such-flag") == 2
    assert cli.main(["no-such-command"]) == 2
    assert _run(tmp_path, "volterra", "--kernel", "gamma:1,2") == 2
    capsys.readouterr()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kernel": "exponential:2,1", "T": 0.5, "dt": 1e-3, "seed": 3}))
    assert _run(tmp_path, "volterra", "--config", str(cfg), "--T", "1") == 0
    doc = json.loads((tmp_path / "volterra.json").read_text())
    assert doc["config"]["T"] == 1.0 and doc["seed"] == 3
    assert doc["result"]["m_T"] == pytest.approx(2 * math.e - 3, rel=1e-4)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert _run(tmp_path, "volterra", "--config", str(bad)) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HAWKESNET_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["volterra", "--T", "0.1"]) == 0
    assert (tmp_path / "env" / "volterra.csv").exists()


def test_validate_exit_codes(tmp_path):
    assert _run(tmp_path, "validate", "--topology", "complete:5", "--envelope", "1.0") == 0
    assert _run(tmp_path, "validate", "--topology", "complete:5", "--lipschitz", "3", "--envelope", "1.0") == 1


def test_simulate_with_audit(tmp_path):
    assert _run(tmp_path, "simulate", "--topology", "lattice:1,11", "--kernel", "exponential:1,2", "--T", "20",
                "--audit", "--audit-every", "3", "--seed", "4") == 0
    doc = json.loads((tmp_path / "simulate.json").read_text())
    assert doc["result"]["audit"]["passed"]
    lines = (tmp_path / "events.csv").read_text().splitlines()
    assert lines[4] == "node,time"


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_subcommand_smoke(tmp_path):
    assert _run(tmp_path, "chaos", "--T", "1", "--N", "4", "8", "16", "--replicas", "8",
                "--slope-range", "-5", "5") in (0, 1)
    assert (tmp_path / "chaos.csv").exists()
    assert _run(tmp_path, "clt", "--T", "5", "--N", "10", "--replicas", "30") in (0, 1)
    assert _run(tmp_path, "lattice-lln", "--topology", "lattice:1,21", "--T", "20", "--replicas", "5",
                "--monitored", "10", "11") in (0, 1)
    assert _run(tmp_path, "impulse-profile", "--topology", "lattice:1,31", "--t", "2", "3", "--x", "0",
                "--replicas", "30") in (0, 1)
    for name in ("clt.csv", "lattice_lln.csv", "profile.csv"):
        assert (tmp_path / name).exists()


def test_plot_option(tmp_path):
    pytest.importorskip("matplotlib")
    assert _run(tmp_path, "volterra", "--T", "0.5", "--plot") == 0
    assert (tmp_path / "volterra.svg").read_text().lstrip().startswith("<?xml")
