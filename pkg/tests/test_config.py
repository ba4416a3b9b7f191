import pytest

from packages.core import config
from packages.core.errors import ConfigError


def _write_home_config(tmp_path, text):
    (tmp_path / "config.yaml").write_text(text)
    config.reset_config_cache()


def test_defaults_without_any_config():
    assert config.get_log_level() == "WARNING"
    assert config.get_workers() == 1
    assert config.get_oracle_cap() == 10**7
    assert config.get_node_limit() is None
    assert config.get_time_limit() is None


def test_yaml_file_in_home(tmp_path, monkeypatch):
    monkeypatch.setenv("GREENSHOP_HOME", str(tmp_path))
    _write_home_config(tmp_path, "logging:\n  level: debug\nexperiment:\n  workers: 3\nsolver:\n  node_limit: 5000\n")
    assert config.get_log_level() == "DEBUG"
    assert config.get_workers() == 3
    assert config.get_node_limit() == 5000


def test_env_wins_over_yaml(tmp_path, monkeypatch):
    monkeypatch.setenv("GREENSHOP_HOME", str(tmp_path))
    _write_home_config(tmp_path, "experiment:\n  workers: 3\noracle:\n  cap: 100\n")
    monkeypatch.setenv("GREENSHOP_WORKERS", "6")
    monkeypatch.setenv("GREENSHOP_TIME_LIMIT", "2.5")
    assert config.get_workers() == 6
    assert config.get_oracle_cap() == 100
    assert config.get_time_limit() == 2.5


def test_workers_must_be_positive(monkeypatch):
    monkeypatch.setenv("GREENSHOP_WORKERS", "0")
    with pytest.raises(ConfigError):
        config.get_workers()


@pytest.mark.parametrize("name,text", [
    ("spec.yaml", "n_jobs: [4]\nseeds: 3\n"),
    ("spec.yml", "n_jobs: [4]\nseeds: 3\n"),
    ("spec.json", '{"n_jobs": [4], "seeds": 3}'),
    ("spec.toml", "n_jobs = [4]\nseeds = 3\n"),
])
def test_load_config_file_formats(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    assert config.load_config_file(path) == {"n_jobs": [4], "seeds": 3}


def test_load_config_file_rejects_unknown_suffix(tmp_path):
    path = tmp_path / "spec.ini"
    path.write_text("[x]\n")
    with pytest.raises(ConfigError):
        config.load_config_file(path)


def test_load_config_file_needs_a_mapping(tmp_path):
    path = tmp_path / "spec.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        config.load_config_file(path)


def test_load_config_file_parse_and_read_errors(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text("{broken")
    with pytest.raises(ConfigError):
        config.load_config_file(path)
    with pytest.raises(ConfigError):
        config.load_config_file(tmp_path / "absent.yaml")
