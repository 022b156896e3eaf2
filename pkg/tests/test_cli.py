"""Tests for the command-line entry point and its exit codes."""

import json

import pytest

from adiakit.commands.common import load_config
from adiakit.exceptions import ConfigError
from adiakit.main import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main


def _write(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


def test_load_config_reports_line_and_column(tmp_path):
    path = _write(tmp_path, '{\n  "family": {"name": "example1",}\n}')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert "line 2" in str(info.value)


def test_load_config_reports_field_path(tmp_path):
    path = _write(tmp_path, {"family": {"name": "example1"}, "sweep": {"T_min": -1.0}})
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert "sweep.T_min" in str(info.value)


def test_seed_override(tmp_path):
    path = _write(tmp_path, {"family": {"name": "example1"}, "seed": 3})
    assert load_config(path).seed == 3
    assert load_config(path, seed=11).seed == 11


@pytest.mark.parametrize(
    "payload",
    [
        "{not json",
        {"sweep": {}},
        {"family": {"name": "no_such_family"}},
        {"family": {"name": "example1"}, "verify": {"checks": ["nonsense"]}},
    ],
)
def test_config_errors_exit_with_two(tmp_path, payload):
    path = _write(tmp_path, payload)
    assert main(["verify", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_verify_writes_report(tmp_path):
    path = _write(tmp_path, {"family": {"name": "example1"}, "verify": {"checks": ["trace_annihilation", "iss_closed_form"]}})
    assert main(["verify", "--config", str(path), "--out", str(tmp_path), "--log-level", "WARNING"]) == EXIT_OK
    report = json.loads((tmp_path / "run_verify.json").read_text())
    assert [c["name"] for c in report["checks"]] == ["trace_annihilation", "iss_closed_form"]
    assert all(c["passed"] for c in report["checks"])


def test_failed_verification_exits_with_one(tmp_path):
    family = {
        "name": "example2",
        "parameters": {
            "bath": {
                "kind": "tabulated",
                "points": [[-8.0, 0.5], [0.0, 1.0], [8.0, 0.5]],
                "enforce_kms": False,
                "lamb_shift_enabled": False,
            }
        },
    }
    path = _write(tmp_path, {"family": family, "verify": {"checks": ["kms_symmetry"]}})
    assert main(["verify", "--config", str(path), "--out", str(tmp_path)]) == EXIT_FAILED


def test_spectrum_writes_csv(tmp_path):
    path = _write(tmp_path, {"family": {"name": "example1"}, "spectrum": {"points": 11}}, name="ex1.json")
    assert main(["spectrum", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "ex1_spectrum.csv").read_text().splitlines()
    assert lines[4].startswith("s,abs_lambda_0,abs_lambda_1,abs_lambda_2,abs_lambda_3,gap")
    assert len(lines) == 5 + 11
    assert (tmp_path / "ex1_spectrum_plot.py").exists()


def test_sweep_writes_csv_json_and_plot(tmp_path):
    config = {
        "family": {"name": "example1"},
        "sweep": {"T_min": 100.0, "T_max": 400.0, "count": 4},
        "fit_window": [100.0, 400.0],
    }
    path = _write(tmp_path, config, name="small.json")
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path), "--workers", "1"]) == EXIT_OK
    for name in ("small_sweep.csv", "small_sweep.json", "small_sweep_plot.py"):
        assert (tmp_path / name).exists()


def test_bound_writes_csv_and_json(tmp_path):
    config = {
        "family": {"name": "constant", "parameters": {"field": [0.3, 0.0, 0.5]}},
        "sweep": {"T_min": 10.0, "T_max": 100.0, "count": 2},
        "bound": {"grid_points": 5},
    }
    path = _write(tmp_path, config, name="flat.json")
    assert main(["bound", "--config", str(path), "--out", str(tmp_path), "--workers", "1"]) == EXIT_OK
    assert "true" in (tmp_path / "flat_bound.csv").read_text()
    assert json.loads((tmp_path / "flat_bound.json").read_text())["C"] == pytest.approx(0.0, abs=1e-12)


def test_bound_violation_fails_the_run(tmp_path):
    config = {
        "family": {"name": "example1"},
        "sweep": {"T_min": 100.0, "T_max": 1000.0, "count": 2},
        "bound": {"grid_points": 5},
        "tolerances": {"bound_safety": 1e-12},
    }
    path = _write(tmp_path, config, name="strict.json")
    assert main(["bound", "--config", str(path), "--out", str(tmp_path), "--workers", "1"]) == EXIT_FAILED
    assert "false" in (tmp_path / "strict_bound.csv").read_text()


def test_help_documents_csv_columns(capsys):
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--help"])
    assert info.value.code == 0
    assert "richardson_discrepancy" in capsys.readouterr().out
