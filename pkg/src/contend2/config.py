import json
import os
import platform
import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Literal

from .console_helper import log_erro, log_warn
from .core import DEFAULT_SEED

VALID_FORMATS = ["json", "csv", "text"]
THREADS_ENV = "CONTEND2_THREADS"
CONFIG_ENV = "CONTEND2_CONFIG"
# TOML first within each directory
CONFIG_NAMES = ("contend2.toml", "contend2.json")

def default_threads() -> int:
    """
    Worker cap for parallel Monte Carlo blocks

    Returns:
        CONTEND2_THREADS when set to a positive integer, else the CPU count
    """
    raw = os.getenv(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            log_warn(f"{THREADS_ENV}='{raw}' is not an integer, ignoring it")
        else:
            if value >= 1:
                return value
            log_warn(f"{THREADS_ENV}={value} must be at least 1, ignoring it")
    return os.cpu_count() or 1

@dataclass
class SimulateSettings:
    """Defaults for the `simulate` command"""

    trials: int = 100_000
    seed: int = DEFAULT_SEED
    # slots per trial before a device counts as unfinished
    horizon: int = 10_000
    devices: int = 2
    block_size: int = 4096

@dataclass
class OptimizeSettings:
    """Defaults for the `optimize` command"""

    tolerance: float = 1e-7
    max_iterations: int = 500
    restarts: int = 16
    seed: int = DEFAULT_SEED

@dataclass
class OutputSettings:
    """Output rendering"""

    format: Literal["json", "csv", "text"] = "json"
    # significant digits for every printed float
    digits: int = 12

@dataclass
class AppConfig:
    """Main application configuration"""

    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    optimize: OptimizeSettings = field(default_factory=OptimizeSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    threads: int = field(default_factory=default_threads)
    config_path: Path | None = None

    @classmethod
    def default(cls, config_path: Path | None = None) -> "AppConfig":
        """Create default configuration"""
        return cls(config_path=config_path)

    def to_dict(self) -> dict[str, Any]:
        return {
            "simulate": asdict(self.simulate),
            "optimize": asdict(self.optimize),
            "output": asdict(self.output),
            "threads": self.threads,
            "config_path": str(self.config_path) if self.config_path else None,
        }

def _section(cls: type, data: Any, name: str) -> Any:
    """Build a settings dataclass, warning about (and dropping) unknown keys"""
    if not isinstance(data, dict):
        raise TypeError(f"[{name}] must be a table/object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    for key in data.keys() - known:
        log_warn(f"Unknown configuration key '{name}.{key}' ignored")
    return cls(**{k: v for k, v in data.items() if k in known})


def user_config_dir() -> Path:
    """~/Library/Preferences on macOS, %APPDATA% on Windows, $XDG_CONFIG_HOME (or ~/.config) elsewhere"""
    system = platform.system()
    if system == "Darwin":
        return Path.home() / "Library" / "Preferences"
    if system == "Windows":
        return Path(os.getenv("APPDATA") or Path.home() / "AppData" / "Roaming")
    return Path(os.getenv("XDG_CONFIG_HOME") or Path.home() / ".config")

def config_candidates() -> list[Path]:
    """Files searched when neither --config nor CONTEND2_CONFIG is given, in order"""
    return [folder / name for folder in (user_config_dir() / "contend2", Path.cwd()) for name in CONFIG_NAMES]

class ConfigManager:
    """Locates, loads and validates the simulate, optimize and output defaults"""

    def __init__(self, config_path: Path | None = None) -> None:
        """
        Args:
            config_path: Explicit file. Otherwise CONTEND2_CONFIG, then the first
                existing entry of `config_candidates()`, then ./contend2.json
                (which need not exist; defaults are used then)
        """
        if config_path is None and os.getenv(CONFIG_ENV):
            config_path = Path(os.environ[CONFIG_ENV])
        if config_path is None:
            config_path = next((p for p in config_candidates() if p.exists()), Path.cwd() / CONFIG_NAMES[-1])
        self.config_path = config_path

    def load_config(self) -> AppConfig:
        """
        Returns:
            Loaded or default configuration; CONTEND2_THREADS overrides `threads`
        """
        if not self.config_path.exists():
            return AppConfig.default()

        try:
            data = self._read()
            config = AppConfig(
                simulate=_section(SimulateSettings, data.get("simulate", {}), "simulate"),
                optimize=_section(OptimizeSettings, data.get("optimize", {}), "optimize"),
                output=_section(OutputSettings, data.get("output", {}), "output"),
                config_path=self.config_path,
            )
            if "threads" in data and not os.getenv(THREADS_ENV):
                config.threads = data["threads"]
            return config
        except (OSError, ValueError, TypeError) as e:
            # tomllib.TOMLDecodeError and json.JSONDecodeError are both ValueErrors
            log_erro(f"Failed to load configuration from: {self.config_path}\n{e}")
            log_warn("Using default configuration")
            return AppConfig.default()

    def _read(self) -> dict[str, Any]:
        """TOML for a .toml suffix, JSON for anything else"""
        text = self.config_path.read_text(encoding="utf-8")
        data = tomllib.loads(text) if self.config_path.suffix.lower() == ".toml" else json.loads(text)
        if not isinstance(data, dict):
            raise TypeError(f"top level must be a table/object, got {type(data).__name__}")
        return data

    def validate_config(self, config: AppConfig) -> list[str]:
        """
        Validate configuration and return list of errors

        Args:
            config: Configuration to validate
        Returns:
            List of validation error messages
        """
        errors = []

        sim = config.simulate
        for name in ("trials", "horizon", "devices", "block_size"):
            value = getattr(sim, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                errors.append(f"simulate.{name} must be a positive integer, got {value!r}")
        opt = config.optimize
        if not isinstance(opt.tolerance, (int, float)) or not opt.tolerance > 0:
            errors.append(f"optimize.tolerance must be positive, got {opt.tolerance!r}")
        for name in ("max_iterations", "restarts"):
            value = getattr(opt, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                errors.append(f"optimize.{name} must be a positive integer, got {value!r}")
        for section, seed in (("simulate", sim.seed), ("optimize", opt.seed)):
            if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
                errors.append(f"{section}.seed must be an integer in [0, 2^64), got {seed!r}")

        if config.output.format not in VALID_FORMATS:
            errors.append(f"output.format must be one of {VALID_FORMATS}, got {config.output.format!r}")
        if not isinstance(config.output.digits, int) or not 1 <= config.output.digits <= 17:
            errors.append(f"output.digits must be between 1 and 17, got {config.output.digits!r}")
        if not isinstance(config.threads, int) or isinstance(config.threads, bool) or config.threads < 1:
            errors.append(f"threads must be a positive integer, got {config.threads!r}")

        return errors
