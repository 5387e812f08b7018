import logging

from pathlib import Path
from typing import Callable, Optional, Sequence

from pydantic import ValidationError

from app.core.config import get_settings
from app.core.errors import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, ConfigurationError, SlicingError
from app.domain.run_config import RunConfig

logger = logging.getLogger("app.cli")


def execute(command: Callable[[], None]) -> int:
    """Run a command body and map failures to exit codes."""
    try:
        command()
    except SlicingError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        logger.error("file not found: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


def check_overrides(overrides: Sequence[str]) -> list[str]:
    for item in overrides:
        if not item.startswith("--") or "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"<override>: expected --section.key=value, got {item!r}")
    return list(overrides)


def reject_overrides(overrides: Sequence[str]) -> None:
    if overrides:
        raise ConfigurationError(f"unexpected arguments: {' '.join(overrides)}")


def flag_overrides(**flags: Optional[object]) -> list[str]:
    """Shortcut flags such as --seed 7 become --run.seed=7."""
    return [f"--run.{key}={value}" for key, value in flags.items() if value is not None]


def output_directory(config: RunConfig, default_name: str) -> Path:
    if config.run.output_dir:
        return Path(config.run.output_dir)
    return Path(get_settings().runs_root) / default_name
