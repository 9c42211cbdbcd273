"""Tests for wickstate.api module."""

import json

import numpy as np
import pytest

import wickstate.api
from wickstate.api import STAGES, RunResult, run_scenario, write_report
from wickstate.core.config import reset_config
from wickstate.core.exceptions import CheckNotFoundError, ScenarioError, StageError
from wickstate.core.models import CheckRecord, MetricSpec, Report, Scenario
from wickstate.spectral_core import DenseOperator, GridSpec, smoothing_order_profile


@pytest.fixture(autouse=True)
def _quiet_config(tmp_path, monkeypatch):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"show_progress": False, "cheb_nodes": 24}))
    monkeypatch.setenv("WICKSTATE_CONFIG", str(config_file))
    reset_config()
    yield
    reset_config()


def _tiny(**overrides):
    data = dict(name="tiny", dim=1, n_per_axis=8, metric=MetricSpec(preset="static-flat"),
                mass_squared=1.0, taylor_order=4, kernel_modes=8)
    data.update(overrides)
    return Scenario(**data)


def test_unknown_preset_is_a_scenario_error():
    """Test that scenario problems surface as ScenarioError, not as a failed stage."""
    with pytest.raises(ScenarioError):
        run_scenario(_tiny(metric=MetricSpec(preset="kerr")))


def test_unknown_check_filter():
    """Test that the check filter is validated before any stage runs."""
    with pytest.raises(CheckNotFoundError):
        run_scenario(_tiny(), checks=["no-such-check"])


def test_run_records_every_stage():
    """Test that a run reports each stage and the geometry checks of a flat metric."""
    result = run_scenario(_tiny(), raise_on_error=False)
    report = result.report
    assert [s.name for s in report.stages] == list(STAGES)
    by_name = {c.name: c for c in report.checks}
    for name in ("gauge-identity-i", "gauge-PK", "transport-invariance", "reduction-selfadjoint"):
        assert by_name[name].passed, name
    assert report.scenario["lambda"] == 0.0
    assert "total" in report.timing


def test_check_filter_and_seed_override():
    """Test that --checks keeps only the named records and --seed is applied."""
    result = run_scenario(_tiny(), checks=["gauge-identity-i"], seed=5, raise_on_error=False)
    assert [c.name for c in result.report.checks] == ["gauge-identity-i"]
    assert result.report.seed == 5


def test_runs_are_deterministic():
    """Test that two runs with the same seed measure the same values."""
    first = run_scenario(_tiny(), raise_on_error=False).report
    second = run_scenario(_tiny(), raise_on_error=False).report
    assert [c.name for c in first.checks] == [c.name for c in second.checks]
    for a, b in zip(first.checks, second.checks):
        assert a.measured == b.measured or (np.isnan(a.measured) and np.isnan(b.measured)), a.name


def test_non_einstein_metric_skips_state_stages():
    """Test that a non-Einstein metric stops after geometry without a stage error."""
    scenario = _tiny(dim=2, n_per_axis=4, metric=MetricSpec(preset="polynomial", params={"c": 1.0}),
                     mass_squared=0.0)
    result = run_scenario(scenario, raise_on_error=False)
    assert [s.status for s in result.report.stages] == ["ok", "skipped", "skipped", "skipped"]
    assert result.error is None
    assert not result.report.passed
    by_name = {c.name: c for c in result.report.checks}
    assert not by_name["einstein-condition"].passed


def test_numerical_failure_becomes_stage_error(monkeypatch):
    """Test that a stray numerical exception inside a stage is reported as a failed stage."""
    def broken(run):
        raise TypeError("unsupported operand")

    monkeypatch.setitem(wickstate.api._STAGE_FUNCS, "factorization", broken)
    result = run_scenario(_tiny(), raise_on_error=False)
    assert isinstance(result.error, StageError)
    assert [s.status for s in result.report.stages] == ["ok", "failed", "skipped", "skipped"]
    with pytest.raises(StageError):
        run_scenario(_tiny())


def test_write_report(tmp_path):
    """Test the files written for a report with one decay table."""
    grid = GridSpec(1, 8)
    table = smoothing_order_profile(DenseOperator.zeros(grid, 1, 1), (1, 2), label="zero")
    rec = CheckRecord.upper("hadamard-sum", "c^+ + c^- = 1", 0.0, 1e-12)
    report = Report(tool_version="0.1.0", scenario={"name": "x"}, seed=0, checks=[rec],
                    timing={"total": 1.5})
    written = write_report(RunResult(report, {"riccati-residual-V1": table}), tmp_path / "out")
    assert written[0] == tmp_path / "out" / "report.json"
    assert json.loads(written[0].read_text())["checks"][0]["name"] == "hadamard-sum"
    assert "timing" not in json.loads(written[0].read_text())
    assert json.loads((tmp_path / "out" / "timing.json").read_text()) == {"total": 1.5}
    csv = tmp_path / "out" / "decay" / "riccati-residual-V1.csv"
    assert csv in written
    assert csv.read_text().splitlines()[0] == "mode,k_abs,norm,m1,m2"


def test_write_report_yaml(tmp_path):
    """Test the YAML report format."""
    yaml = pytest.importorskip("yaml")
    report = Report(tool_version="0.1.0", scenario={"name": "x"}, seed=3)
    written = write_report(RunResult(report), tmp_path, fmt="yaml")
    assert yaml.safe_load(written[0].read_text())["seed"] == 3


@pytest.mark.slow
def test_flat_static_scenario_passes():
    """Test the bundled flat 1d scenario end to end."""
    result = run_scenario("flat-static-1d")
    assert all(s.status == "ok" for s in result.report.stages)
    assert result.report.passed, [c.name for c in result.report.failed_checks]
    assert result.tables
    by_name = {c.name: c for c in result.report.checks}
    assert by_name["positivity-kernel"].detail["margin_minus"] is not None


@pytest.mark.slow
def test_non_einstein_control_fails_gauge_identity():
    """Test that the polynomial control metric is flagged by the gauge identities."""
    result = run_scenario("non-einstein-control", raise_on_error=False)
    by_name = {c.name: c for c in result.report.checks}
    assert not by_name["gauge-identity-iii"].passed
    assert result.error is None
    assert [s.status for s in result.report.stages] == ["ok", "skipped", "skipped", "skipped"]


@pytest.mark.slow
def test_desitter_scenario_passes():
    """Test the bundled de Sitter scenario end to end, including the minus positivity branch."""
    result = run_scenario("desitter-3d")
    assert all(s.status == "ok" for s in result.report.stages)
    assert result.report.passed, [c.name for c in result.report.failed_checks]
    by_name = {c.name: c for c in result.report.checks}
    for name in ("wick-reality", "frame-normalization", "green-homogeneous", "riccati-residual", "positivity-energy"):
        assert by_name[name].passed, name
    assert by_name["positivity-kernel"].detail["margin_minus"] is not None
