import json
import os
import platform

import pytest

from src.contend2.config import THREADS_ENV, AppConfig, ConfigManager, config_candidates, default_threads, user_config_dir
from src.contend2.core import DEFAULT_SEED


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep the caller's environment out of every test"""
    monkeypatch.delenv(THREADS_ENV, raising=False)
    monkeypatch.delenv("CONTEND2_CONFIG", raising=False)


class TestDefaults:
    """Built-in configuration"""

    def test_app_config_default(self) -> None:
        """Documented defaults"""
        config = AppConfig.default()
        assert config.simulate.trials == 100_000
        assert config.simulate.horizon == 10_000
        assert config.simulate.seed == DEFAULT_SEED
        assert config.optimize.tolerance == 1e-7
        assert config.optimize.restarts == 16
        assert config.output.format == "json"
        assert config.output.digits == 12
        assert config.threads == (os.cpu_count() or 1)
        assert ConfigManager().validate_config(config) == []

    def test_to_dict(self) -> None:
        """Sections and threads, JSON serializable"""
        data = AppConfig.default().to_dict()
        assert set(data) == {"simulate", "optimize", "output", "threads", "config_path"}
        json.dumps(data)


class TestDefaultThreads:
    """CONTEND2_THREADS handling"""

    def test_env_override(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A positive integer wins"""
        monkeypatch.setenv(THREADS_ENV, "3")
        assert default_threads() == 3
        assert AppConfig.default().threads == 3

    @pytest.mark.parametrize("raw", ["many", "0"])
    def test_bad_env_ignored(self, raw: str, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]) -> None:
        """Bad values warn and fall back to the CPU count"""
        monkeypatch.setenv(THREADS_ENV, raw)
        assert default_threads() == (os.cpu_count() or 1)
        assert "[WARN]" in capsys.readouterr().err


class TestConfigManager:
    """Locating and loading configuration files"""

    def test_missing_file(self, tmp_path) -> None:
        """Defaults when nothing exists"""
        config = ConfigManager(tmp_path / "absent.json").load_config()
        assert config == AppConfig.default()

    def test_env_path(self, tmp_path, monkeypatch: pytest.MonkeyPatch) -> None:
        """CONTEND2_CONFIG names the file"""
        path = tmp_path / "custom.json"
        monkeypatch.setenv("CONTEND2_CONFIG", str(path))
        assert ConfigManager().config_path == path

    def test_search_order(self, tmp_path, monkeypatch: pytest.MonkeyPatch) -> None:
        """User config dir before the working directory, TOML before JSON"""
        monkeypatch.setattr(platform, "system", lambda: "Linux")
        monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
        work = tmp_path / "work"
        work.mkdir()
        monkeypatch.chdir(work)
        user = tmp_path / "xdg" / "contend2"
        assert user_config_dir() == tmp_path / "xdg"
        assert config_candidates() == [user / "contend2.toml", user / "contend2.json", work / "contend2.toml", work / "contend2.json"]

        assert ConfigManager().config_path == work / "contend2.json"
        (work / "contend2.json").write_text("{}")
        (work / "contend2.toml").write_text("")
        assert ConfigManager().config_path == work / "contend2.toml"
        user.mkdir(parents=True)
        (user / "contend2.json").write_text("{}")
        assert ConfigManager().config_path == user / "contend2.json"

    def test_load_json(self, tmp_path) -> None:
        """Sections override only what they name"""
        path = tmp_path / "contend2.json"
        path.write_text(json.dumps({"simulate": {"trials": 5000, "seed": 9}, "output": {"format": "csv"}, "threads": 2}))
        config = ConfigManager(path).load_config()
        assert (config.simulate.trials, config.simulate.seed, config.simulate.horizon) == (5000, 9, 10_000)
        assert config.output.format == "csv"
        assert config.threads == 2
        assert config.config_path == path

    def test_load_toml(self, tmp_path) -> None:
        """TOML tables map to sections"""
        path = tmp_path / "contend2.toml"
        path.write_text('[optimize]\ntolerance = 1e-9\nrestarts = 4\n\n[output]\ndigits = 8\n')
        config = ConfigManager(path).load_config()
        assert config.optimize.tolerance == 1e-9
        assert config.optimize.restarts == 4
        assert config.output.digits == 8

    def test_env_threads_beat_file(self, tmp_path, monkeypatch: pytest.MonkeyPatch) -> None:
        """CONTEND2_THREADS overrides the file's threads"""
        monkeypatch.setenv(THREADS_ENV, "5")
        path = tmp_path / "contend2.json"
        path.write_text(json.dumps({"threads": 2}))
        assert ConfigManager(path).load_config().threads == 5

    def test_unknown_key_warns(self, tmp_path, capsys: pytest.CaptureFixture[str]) -> None:
        """Unknown keys are dropped with a warning"""
        path = tmp_path / "contend2.json"
        path.write_text(json.dumps({"simulate": {"trails": 10}}))
        config = ConfigManager(path).load_config()
        assert config.simulate.trials == 100_000
        assert "simulate.trails" in capsys.readouterr().err

    @pytest.mark.parametrize("content", ["{not json", '{"simulate": [1, 2]}', "[1, 2]"])
    def test_broken_file_falls_back(self, content: str, tmp_path, capsys: pytest.CaptureFixture[str]) -> None:
        """Unparseable files log an error and use defaults"""
        path = tmp_path / "contend2.json"
        path.write_text(content)
        config = ConfigManager(path).load_config()
        assert config == AppConfig.default()
        assert "Failed to load configuration" in capsys.readouterr().err


class TestValidateConfig:
    """Semantic checks on loaded values"""

    def test_reports_every_error(self) -> None:
        """One message per bad value"""
        config = AppConfig.default()
        config.simulate.trials = 0
        config.optimize.tolerance = -1.0
        config.output.format = "xml"  # type: ignore[assignment]
        config.output.digits = 30
        config.threads = 0
        errors = ConfigManager().validate_config(config)
        assert len(errors) == 5
        assert any("simulate.trials" in e for e in errors)
        assert any("output.format" in e for e in errors)

    def test_seed_range(self) -> None:
        """Seeds must be nonnegative integers"""
        config = AppConfig.default()
        config.optimize.seed = -1
        assert ConfigManager().validate_config(config) == ["optimize.seed must be an integer in [0, 2^64), got -1"]
