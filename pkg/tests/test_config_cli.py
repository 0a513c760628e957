import csv
import math
from pathlib import Path

import pytest

from spinboson.asymptotics import COLUMNS
from spinboson.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, describe_lines, main
from spinboson.config import ConfigError, load_config, parse_config

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).parent / "golden" / "strong_coupling.csv"

MINIMAL = """
[scenario]
name = van_hove

[model]
eta = 0
g = 1
n_max = 40

[sweep]
kind = strong_coupling
"""


def test_parse_minimal():
    cfg = parse_config(MINIMAL)
    assert cfg.kind == "strong_coupling"
    assert cfg.gs == (1.0,) and cfg.n_max == 40
    assert cfg.options.fixed_n_max == 40
    assert cfg.stem == "van_hove_strong_coupling"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    load_config(path)


@pytest.mark.parametrize("text,match", [
    (MINIMAL + "colour = blue\n", "unknown key"),
    (MINIMAL + "[extras]\nx = 1\n", "unknown section"),
    (MINIMAL.replace("n_max = 40", "n_max = 0"), "n_max=0"),
    (MINIMAL.replace("kind = strong_coupling", "kind = massless"), "incompatible"),
    (MINIMAL.replace("kind = strong_coupling", "kind = nonsense"), "kind must be"),
    (MINIMAL.replace("name = van_hove", "name = nowhere"), "available presets"),
    (MINIMAL + "[solver]\nrtol = 0\n", "positive"),
    (MINIMAL.replace("g = 1", "g = one"), "numbers"),
    ("[scenario]\nname = van_hove\n", "missing section"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_run_exit_code_for_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(MINIMAL + "typo = 1\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG


def test_run_van_hove(tmp_path, capsys):
    assert main(["run", "--config", str(CONFIGS / "van_hove.ini"), "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "van_hove_strong_coupling.csv").open()))
    assert len(rows) == 1
    assert float(rows[0]["ground_energy"]) == pytest.approx(-0.25, abs=1e-10)
    assert "n_max=40" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    outputs = []
    for sub in ("a", "b"):
        target = tmp_path / sub
        assert main(["run", "--config", str(CONFIGS / "van_hove.ini"), "--out", str(target), "--format", "both"]) == 0
        outputs.append(((target / "van_hove_strong_coupling.csv").read_bytes(),
                        (target / "van_hove_strong_coupling.jsonl").read_bytes()))
    assert outputs[0] == outputs[1]


def test_run_flags_unconverged_rows(tmp_path):
    cfg = tmp_path / "tight.ini"
    # the lab frame needs many bosons here; the polaron frame would be exact for eta = 0
    text = MINIMAL.replace("n_max = 40", "n_max = 3").replace("g = 1", "g = 2")
    cfg.write_text(text.replace("kind = strong_coupling", "kind = strong_coupling\nframe = lab"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_FAILURE
    rows = list(csv.DictReader((tmp_path / "van_hove_strong_coupling.csv").open()))
    assert rows[0]["flagged"] == "1"


def test_strong_coupling_golden(tmp_path):
    assert main(["run", "--config", str(CONFIGS / "strong_coupling.ini"), "--out", str(tmp_path), "--format", "csv"]) == 0
    got = list(csv.reader((tmp_path / "single_mode_strong_coupling.csv").open()))
    want = list(csv.reader(GOLDEN.open()))
    assert tuple(got[0]) == COLUMNS == tuple(want[0])
    assert len(got) == len(want) == 6
    for g_row, w_row in zip(got[1:], want[1:]):
        for name, a, b in zip(COLUMNS, g_row, w_row):
            if name in ("frame", "n_max", "in_gap_count", "flagged"):
                assert a == b, name
            elif name != "truncation_error":
                x, y = float(a), float(b)
                assert (math.isnan(x) and math.isnan(y)) or abs(x - y) <= 1e-10 * max(1.0, abs(y)), name


def test_check_suites(capsys):
    assert main(["check", "ccr"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 6 and "FAIL" not in out
    assert main(["check", "nonexistent"]) == EXIT_CONFIG


def test_describe(capsys):
    assert main(["describe", "massive_3d"]) == EXIT_OK
    assert "min_omega=1" in capsys.readouterr().out
    assert main(["describe", "missing"]) == EXIT_CONFIG
    assert "available presets" in capsys.readouterr().err


def test_describe_counterexample_norms_increase():
    lines = describe_lines("counterexample_3d")
    norms = [float(line.split("||omega^-1 v||^2=")[1]) for line in lines if "||omega^-1 v||^2=" in line]
    assert len(norms) == 3 and norms[0] < norms[1] < norms[2]


def test_usage_errors():
    assert main([]) == EXIT_CONFIG
    assert main(["run"]) == EXIT_CONFIG
