"""Tests for wickstate.core.config module."""

import json
import logging
from pathlib import Path

import pytest

from wickstate.core.config import WickStateConfig, _load_config_file, get_config, reset_config
from wickstate.core.logging import PACKAGE_LOGGER, get_logger, setup_logging


@pytest.fixture(autouse=True)
def _reset_config(monkeypatch):
    monkeypatch.delenv("WICKSTATE_CONFIG", raising=False)
    for name in ("WICKSTATE_JOBS", "WICKSTATE_CHEB_NODES"):
        monkeypatch.delenv(name, raising=False)
    reset_config()
    yield
    reset_config()


def test_get_config_default():
    """Test getting default configuration."""
    config = get_config()
    assert isinstance(config, WickStateConfig)
    assert config.regularizer_radius == 4.0
    assert config.smoothing_bound == 10.0
    assert config.guard_order == 4
    assert config.log_level == "INFO"


def test_get_config_cached():
    """Test that config is cached after first call."""
    config1 = get_config()
    config2 = get_config()
    assert config1 is config2


def test_load_config_file_json(tmp_path):
    """Test loading JSON config file."""
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"cheb_nodes": 64, "log_level": "DEBUG"}))

    loaded = _load_config_file(config_file)
    assert loaded["cheb_nodes"] == 64
    assert loaded["log_level"] == "DEBUG"


def test_load_config_file_yaml(tmp_path):
    """Test loading YAML config file."""
    yaml = pytest.importorskip("yaml")

    config_file = tmp_path / "config.yaml"
    config_file.write_text(yaml.dump({"evolution_steps": 400, "trace_reversal": "literal"}))

    loaded = _load_config_file(config_file)
    assert loaded["evolution_steps"] == 400
    assert loaded["trace_reversal"] == "literal"


def test_load_config_file_not_found():
    """Test loading non-existent config file."""
    with pytest.raises(FileNotFoundError):
        _load_config_file(Path("/nonexistent/config.json"))


def test_load_config_file_unsupported_format(tmp_path):
    """Test loading config file with unsupported format."""
    config_file = tmp_path / "config.txt"
    config_file.write_text("some text")

    with pytest.raises(ValueError, match="Unsupported config file format"):
        _load_config_file(config_file)


def test_load_config_file_yaml_without_pyyaml(tmp_path, monkeypatch):
    """Test loading YAML config when PyYAML is not installed."""
    original_import = __import__

    def mock_import(name, *args, **kwargs):
        if name == "yaml":
            raise ImportError("No module named 'yaml'")
        return original_import(name, *args, **kwargs)

    monkeypatch.setattr("builtins.__import__", mock_import)

    config_file = tmp_path / "config.yaml"
    config_file.write_text("key: value")

    with pytest.raises(ValueError, match="YAML config requires PyYAML"):
        _load_config_file(config_file)


def test_get_config_with_env_file(tmp_path, monkeypatch):
    """Test that WICKSTATE_CONFIG overrides the defaults."""
    config_file = tmp_path / "wickstate_config.json"
    config_file.write_text(json.dumps({"cheb_nodes": 24, "jobs": 2, "show_progress": False}))
    monkeypatch.setenv("WICKSTATE_CONFIG", str(config_file))

    config = get_config()
    assert config.cheb_nodes == 24
    assert config.jobs == 2
    assert config.show_progress is False


def test_get_config_with_broken_env_file(tmp_path, monkeypatch, capsys):
    """Test that an unreadable config file falls back to defaults with a warning."""
    config_file = tmp_path / "broken.json"
    config_file.write_text("{not json")
    monkeypatch.setenv("WICKSTATE_CONFIG", str(config_file))

    config = get_config()
    assert config.cheb_nodes == 48
    assert "Failed to load config" in capsys.readouterr().err


def test_wickstate_config_model():
    """Test WickStateConfig Pydantic model."""
    config = WickStateConfig()
    assert config.output_dir == Path("wickstate-out")
    assert config.cheb_nodes == 48
    assert config.fixed_point_max_iter == 40
    assert config.evolution_steps == 200
    assert config.kernel_cutoff == 1e-10
    assert config.wick_gauge_scale == 1.0
    assert config.trace_reversal == "reflection"
    assert config.log_file is None


def test_wickstate_config_rejects_unknown_trace_mode():
    """Test that the trace reversal convention is validated."""
    with pytest.raises(ValueError):
        WickStateConfig(trace_reversal="mirror")


def test_wickstate_config_rejects_unknown_field():
    """Test that misspelled settings are not silently ignored."""
    with pytest.raises(ValueError):
        WickStateConfig(cheb_node=24)


def test_wickstate_config_bounds():
    """Test that counts and radii are range checked."""
    with pytest.raises(ValueError):
        WickStateConfig(cheb_nodes=4)
    with pytest.raises(ValueError):
        WickStateConfig(regularizer_radius=0.0)


def test_env_field_overrides_file(tmp_path, monkeypatch):
    """Test that WICKSTATE_<FIELD> wins over the config file."""
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"jobs": 2, "cheb_nodes": 24}))
    monkeypatch.setenv("WICKSTATE_CONFIG", str(config_file))
    monkeypatch.setenv("WICKSTATE_JOBS", "3")

    config = get_config()
    assert config.jobs == 3
    assert config.cheb_nodes == 24


def test_invalid_settings_fall_back_to_defaults(tmp_path, monkeypatch, capsys):
    """Test that an out-of-range setting keeps the defaults and warns."""
    monkeypatch.setenv("WICKSTATE_CHEB_NODES", "2")

    config = get_config()
    assert config.cheb_nodes == 48
    assert "Failed to load config" in capsys.readouterr().err


def test_setup_logging_writes_file(tmp_path):
    """Test that a log file receives package log records at the chosen level."""
    log_file = tmp_path / "logs" / "run.log"
    setup_logging(level="DEBUG", log_file=log_file)
    try:
        get_logger("wickstate.test").debug("fixed point iteration 1")
        for handler in logging.getLogger(PACKAGE_LOGGER).handlers:
            handler.flush()
        assert "fixed point iteration 1" in log_file.read_text()
    finally:
        setup_logging(level="INFO")


def test_setup_logging_unknown_level_is_info():
    """Test that an unknown level name falls back to INFO and handlers are replaced."""
    setup_logging(level="chatty")
    setup_logging(level="chatty")
    package = logging.getLogger(PACKAGE_LOGGER)
    assert package.level == logging.INFO
    assert len(package.handlers) == 1
