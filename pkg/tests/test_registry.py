"""Tests for wickstate.core.registry module."""

import json

import pytest

from wickstate.core.exceptions import CheckNotFoundError, ScenarioError
from wickstate.core.models import CheckRecord, Report, Scenario
from wickstate.core.registry import (
    check_anchor,
    describe_check,
    list_checks,
    list_scenarios,
    load_scenario,
    make_record,
    parse_scenario,
    resolve_scenario,
)


def _minimal(**overrides):
    data = {"name": "t", "dim": 1, "n_per_axis": 8, "metric": {"preset": "static-flat"}}
    data.update(overrides)
    return data


def test_describe_check():
    """Test looking up a catalogued check."""
    info = describe_check("hadamard-sum")
    assert info.stage == "factorization"
    assert info.tolerance == 1e-12
    assert check_anchor("hadamard-sum") == "c^+ + c^- = 1"


def test_describe_check_suggestions():
    """Test that an unknown name carries close matches."""
    with pytest.raises(CheckNotFoundError) as exc:
        describe_check("hadamard-summ")
    assert "hadamard-sum" in exc.value.suggestions
    assert "Did you mean" in str(exc.value)


def test_list_checks_by_stage():
    """Test filtering the catalogue by stage."""
    geometry = list_checks("geometry")
    assert geometry
    assert all(c.stage == "geometry" for c in geometry)
    assert len(list_checks()) > len(geometry)
    assert list_checks("nonexistent") == []


def test_make_record_upper_and_override():
    """Test pass/fail of an upper-bound check and a scenario tolerance override."""
    assert make_record("hadamard-sum", 1e-14).passed
    assert not make_record("hadamard-sum", 1e-6).passed
    rec = make_record("hadamard-sum", 1e-6, {"hadamard-sum": 1e-5})
    assert rec.passed
    assert rec.tolerance == 1e-5


def test_make_record_lower_bound():
    """Test that lower checks pass when measured >= -tolerance."""
    assert make_record("positivity-energy", 0.5).passed
    assert not make_record("positivity-energy", -1.0).passed


def test_make_record_informational_flag():
    """Test that informational checks never fail a report."""
    rec = make_record("positivity-negative-control", -5.0)
    assert rec.informational
    assert not rec.passed
    report = Report(tool_version="0", scenario={}, seed=0, checks=[rec])
    assert report.passed


def test_report_failed_checks():
    """Test that a failing non-informational check fails the report."""
    bad = CheckRecord.upper("x", "anchor", 2.0, 1.0)
    report = Report(tool_version="0", scenario={}, seed=0, checks=[bad])
    assert not report.passed
    assert report.failed_checks == [bad]
    assert json.loads(report.to_json())["checks"][0]["name"] == "x"


def test_list_scenarios_bundled():
    """Test that the bundled scenarios are listed."""
    names = list_scenarios()
    for name in ("flat-static-1d", "flat-static-2d", "desitter-3d", "non-einstein-control"):
        assert name in names


def test_resolve_bundled_scenario():
    """Test resolving a bundled scenario by name."""
    sc = resolve_scenario("flat-static-1d")
    assert isinstance(sc, Scenario)
    assert sc.dim == 1
    assert sc.metric.preset == "static-flat"


def test_resolve_unknown_scenario():
    """Test that an unknown scenario name suggests close names."""
    with pytest.raises(ScenarioError, match="Did you mean"):
        resolve_scenario("flat-static-1")


def test_parse_scenario_lambda_alias():
    """Test that 'lambda' is accepted for the cosmological constant."""
    sc = parse_scenario(_minimal(**{"lambda": 3.0}))
    assert sc.Lambda == 3.0


@pytest.mark.parametrize(
    "overrides",
    [
        {"dim": 4},
        {"n_per_axis": 7},
        {"T_half": 0.0},
        {"taylor_order": 1},
        {"s_nodes": 2},
        {"wick_gauge_scale": -1.0},
        {"unknown_field": 1},
    ],
)
def test_parse_scenario_rejects_invalid(overrides):
    """Test that schema violations raise ScenarioError."""
    with pytest.raises(ScenarioError, match="Invalid scenario"):
        parse_scenario(_minimal(**overrides))


def test_parse_scenario_needs_mapping():
    """Test that a non-mapping scenario is rejected."""
    with pytest.raises(ScenarioError, match="must be a mapping"):
        parse_scenario([1, 2, 3])


def test_load_scenario_json(tmp_path):
    """Test loading a scenario file."""
    path = tmp_path / "s.json"
    path.write_text(json.dumps(_minimal(seed=7)))
    assert load_scenario(path).seed == 7


def test_load_scenario_malformed(tmp_path):
    """Test that malformed JSON raises ScenarioError."""
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(ScenarioError, match="Malformed JSON"):
        load_scenario(path)


def test_load_scenario_missing(tmp_path):
    """Test that an unreadable file raises ScenarioError."""
    with pytest.raises(ScenarioError, match="Cannot read"):
        load_scenario(tmp_path / "missing.json")
