"""
Configuration management: user settings, logging setup and run configs.
"""

import configparser
import json
import logging
import logging.handlers
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from core.errors import DomainError

logger = logging.getLogger(__name__)

APP_NAME = "ols-moment-lab"
THREADS_ENV = "OLS_MOMENT_LAB_THREADS"
RUN_CONFIG_SCHEMA = 1
OUTPUT_FORMATS = ("json", "csv")


def default_config_file() -> Path:
    return Path.home() / ".config" / APP_NAME / "config.cfg"


def load_settings(config_file: Optional[Path] = None) -> Dict:
    """
    Load user settings from the config file.

    A missing file is created with defaults and the defaults are used.

    Args:
        config_file: Settings file; defaults to ~/.config/ols-moment-lab/config.cfg

    Returns:
        Settings dictionary
    """
    config_file = Path(config_file) if config_file else default_config_file()

    if not config_file.exists():
        try:
            config_file.parent.mkdir(parents=True, exist_ok=True)
            create_default_settings(config_file)
            logger.info(f"Created default config file at: {config_file}")
        except OSError as e:
            logger.warning(f"Could not create config file {config_file}: {e}")

    config = configparser.ConfigParser()
    try:
        config.read(config_file)
        settings = {
            "log_level": config.get("logging", "level", fallback="INFO"),
            "log_file": config.get("logging", "file", fallback=""),
            "threads": config.getint("simulation", "threads", fallback=1),
            "max_order": config.getint("simulation", "max_order", fallback=8),
            "output_format": config.get("output", "format", fallback="json"),
        }
    except (configparser.Error, ValueError) as e:
        raise DomainError(f"Error loading configuration {config_file}: {e}") from e

    # Environment variable takes precedence over config file
    env_threads = os.getenv(THREADS_ENV)
    if env_threads:
        try:
            settings["threads"] = int(env_threads)
        except ValueError as e:
            raise DomainError(
                f"{THREADS_ENV} must be an integer: {env_threads!r}"
            ) from e

    if settings["threads"] < 1:
        raise DomainError(f"threads must be >= 1, got {settings['threads']}")
    if settings["output_format"] not in OUTPUT_FORMATS:
        raise DomainError(
            f"output format must be one of {OUTPUT_FORMATS}, "
            f"got {settings['output_format']!r}"
        )
    return settings


def create_default_settings(config_file: Path):
    """Create a default settings file."""
    with open(config_file, "w") as f:
        f.write("# ols-moment-lab settings\n\n")

        f.write("[logging]\n")
        f.write("level = INFO\n")
        f.write("# Leave empty to log to stderr only\n")
        f.write("file = \n\n")

        f.write("[simulation]\n")
        f.write(f"# Worker threads; {THREADS_ENV} overrides this value\n")
        f.write("threads = 1\n")
        f.write("# Highest moment order carried by the bundled profiles\n")
        f.write("max_order = 8\n\n")

        f.write("[output]\n")
        f.write("# json or csv\n")
        f.write("format = json\n")


def setup_logging(log_level: str, log_file: str = ""):
    """
    Setup logging: diagnostics to stderr, optionally also to a rotating file.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file: Log file path; empty for no file
    """
    level = getattr(logging, log_level.upper(), logging.INFO)

    detailed_formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Clear existing handlers to avoid duplicates
    root_logger.handlers.clear()

    # stdout is reserved for data
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(level)
    stream_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root_logger.addHandler(stream_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        # Rotating file handler - 10MB max, keep 5 old files
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(detailed_formatter)
        root_logger.addHandler(file_handler)

    logging.getLogger("concurrent.futures").setLevel(logging.WARNING)


@dataclass
class RunConfig:
    """Declarative parameters of one subcommand run."""

    command: str
    params: Dict = field(default_factory=dict)
    schema: int = RUN_CONFIG_SCHEMA

    def to_dict(self) -> Dict:
        return {"schema": self.schema, "command": self.command, "params": self.params}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict) -> "RunConfig":
        if not isinstance(data, dict) or "command" not in data:
            raise DomainError("a run config needs a 'command' field")
        schema = data.get("schema", RUN_CONFIG_SCHEMA)
        if schema != RUN_CONFIG_SCHEMA:
            raise DomainError(f"unsupported run config schema {schema}")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise DomainError("run config 'params' must be an object")
        return cls(data["command"], dict(params), schema)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise DomainError(f"run config is not valid JSON: {e}") from e
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise DomainError(f"cannot read run config {path}: {e}") from e
        return cls.loads(text)
