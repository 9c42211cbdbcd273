"""Tests for wickstate.cli module."""

import json

import pytest
from typer.testing import CliRunner

from wickstate.api import RunResult
from wickstate.cli import EXIT_FAILED_CHECKS, EXIT_SCENARIO, EXIT_STAGE, app
from wickstate.core.config import reset_config
from wickstate.core.exceptions import StageError
from wickstate.core.models import CheckRecord, Report

runner = CliRunner()


@pytest.fixture(autouse=True)
def _reset_config(monkeypatch):
    monkeypatch.delenv("WICKSTATE_CONFIG", raising=False)
    reset_config()
    yield
    reset_config()


def _result(passed=True, error=None):
    rec = CheckRecord.upper("hadamard-sum", "c^+ + c^- = 1", 0.0 if passed else 1.0, 1e-12)
    report = Report(tool_version="0.1.0", scenario={"name": "fake"}, seed=0, checks=[rec])
    return RunResult(report, {}, error)


def _fake_run(result):
    def run_scenario(scenario, **kwargs):
        return result

    return run_scenario


def test_version():
    """Test version command."""
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert "wickstate" in result.stdout
    assert "0.1.0" in result.stdout


def test_show_config():
    """Test show-config command."""
    result = runner.invoke(app, ["show-config"])
    assert result.exit_code == 0
    assert "regularizer_radius" in result.stdout
    assert "cheb_nodes" in result.stdout


def test_list_scenarios():
    """Test list-scenarios command."""
    result = runner.invoke(app, ["list-scenarios"])
    assert result.exit_code == 0
    assert "flat-static-1d" in result.stdout
    assert "desitter-3d" in result.stdout


def test_list_checks_for_stage():
    """Test list-checks command with a stage filter."""
    result = runner.invoke(app, ["list-checks", "--stage", "factorization"])
    assert result.exit_code == 0
    assert "Check" in result.stdout
    assert "hadamard-sum" in result.stdout


def test_describe_check():
    """Test describe-check command."""
    result = runner.invoke(app, ["describe-check", "hadamard-sum"])
    assert result.exit_code == 0
    assert "Anchor:" in result.stdout
    assert "Rationale:" in result.stdout


def test_describe_check_unknown():
    """Test describe-check command with an unknown name."""
    result = runner.invoke(app, ["describe-check", "hadamard-summ"])
    assert result.exit_code == EXIT_SCENARIO
    assert "Unknown check" in result.stdout


def test_run_malformed_scenario(tmp_path):
    """Test run command with a malformed scenario file."""
    path = tmp_path / "bad.json"
    path.write_text("{")
    result = runner.invoke(app, ["run", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_SCENARIO
    assert "Malformed JSON" in result.stdout


def test_run_unknown_scenario(tmp_path):
    """Test run command with an unknown scenario name."""
    result = runner.invoke(app, ["run", "no-such-scenario", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_SCENARIO


def test_run_unknown_check(tmp_path):
    """Test run command with an unknown check filter."""
    result = runner.invoke(app, ["run", "flat-static-1d", "--checks", "nope", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_SCENARIO


def test_run_bad_format(tmp_path):
    """Test run command with an unsupported report format."""
    result = runner.invoke(app, ["run", "flat-static-1d", "--format", "xml", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_SCENARIO
    assert "unsupported format" in result.stdout


def test_run_all_pass(tmp_path, monkeypatch):
    """Test run command when every check passes."""
    monkeypatch.setattr("wickstate.cli.run_scenario", _fake_run(_result()))
    result = runner.invoke(app, ["run", "fake", "--out", str(tmp_path)])
    assert result.exit_code == 0
    assert "All 1 checks passed" in result.stdout
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["checks"][0]["passed"] is True
    assert (tmp_path / "timing.json").exists()


def test_run_failed_checks(tmp_path, monkeypatch):
    """Test run command exit code when a check fails."""
    monkeypatch.setattr("wickstate.cli.run_scenario", _fake_run(_result(passed=False)))
    result = runner.invoke(app, ["run", "fake", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_FAILED_CHECKS
    assert "hadamard-sum" in result.stdout


def test_run_stage_error(tmp_path, monkeypatch):
    """Test run command exit code when a stage fails numerically."""
    error = StageError("euclidean", "collocation system is singular")
    monkeypatch.setattr("wickstate.cli.run_scenario", _fake_run(_result(error=error)))
    result = runner.invoke(app, ["run", "fake", "--out", str(tmp_path), "--quiet"])
    assert result.exit_code == EXIT_STAGE
    assert (tmp_path / "report.json").exists()
