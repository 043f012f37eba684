"""Tests for main module."""

import json
from unittest.mock import MagicMock, patch

import pytest

from metrichuman.core.error_handler import NumericalError
from metrichuman.main import build_parser, main, setup_logging


def run(capsys, argv):
    """Run main with logging left untouched; returns (exit code, parsed stdout, raw stdout)."""
    with patch("metrichuman.main.setup_logging"):
        code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out), out


def test_setup_logging():
    """Test logging setup."""
    with patch("logging.basicConfig") as mock_config:
        setup_logging("DEBUG")
        mock_config.assert_called_once()


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_parser_common_options():
    args = build_parser().parse_args(["slam", "--in-dir", "scene", "--seed", "3", "--out-dir", "out"])
    assert args.command == "slam"
    assert args.seed == 3
    assert args.calib_dir is None
    assert str(args.out_dir) == "out"


def test_synth_writes_summary(capsys, tmp_path, settings):
    config = tmp_path / "config.json"
    settings.export_settings(config)
    code, summary, _ = run(capsys, ["synth", "--config", config, "--out-dir", tmp_path / "scene", "--seed", 5])
    assert code == 0
    assert summary["status"] == "ok"
    assert summary["seed"] == 5
    assert (tmp_path / "scene" / "intrinsics.json").is_file()


def test_eval_stdout_is_canonical(capsys, scene_dir, tmp_path):
    gt = scene_dir / "gt" / "trajectory.txt"
    code, summary, out = run(capsys, ["eval", "--pred-traj", gt, "--gt-traj", gt, "--out-dir", tmp_path])
    assert code == 0
    assert out == json.dumps(summary, sort_keys=True, indent=2) + "\n"
    assert summary["metrics"]["ate_mm"] == pytest.approx(0.0, abs=1e-9)


def test_missing_scene_exits_one(capsys, tmp_path):
    code, summary, _ = run(capsys, ["calibrate", "--in-dir", tmp_path / "missing", "--out-dir", tmp_path])
    assert code == 1
    assert summary["status"] == "error"
    assert summary["category"] == "INPUT"
    assert summary["details"]["file_path"].endswith("missing")


def test_bad_config_exits_one(capsys, tmp_path):
    config = tmp_path / "config.json"
    config.write_text('{"slam": {"unknown": 1}}')
    code, summary, _ = run(capsys, ["synth", "--config", config, "--out-dir", tmp_path])
    assert code == 1
    assert summary["category"] == "CONFIGURATION"


def test_numerical_failure_writes_diagnostics(capsys, tmp_path):
    error = NumericalError("Bundle adjustment did not converge", diagnostics={"iterations": 4})
    with patch("metrichuman.main.HumanSlamPipeline") as mock_pipeline:
        mock_instance = MagicMock()
        mock_pipeline.return_value = mock_instance
        mock_instance.slam.side_effect = error

        code, summary, _ = run(capsys, ["slam", "--in-dir", tmp_path, "--out-dir", tmp_path])

    assert code == 2
    assert summary["category"] == "NUMERICAL"
    diagnostics = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diagnostics["iterations"] == 4
    assert diagnostics["stage"] == "slam"


def test_unexpected_exception(capsys, tmp_path):
    with patch("metrichuman.main.HumanSlamPipeline") as mock_pipeline:
        mock_pipeline.return_value.synth.side_effect = RuntimeError("boom")

        code, summary, _ = run(capsys, ["synth", "--out-dir", tmp_path])

    assert code == 1
    assert summary["category"] == "SYSTEM"
    assert "boom" in summary["message"]
