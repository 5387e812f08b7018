import configparser
import re

from functools import lru_cache
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigurationError
from app.domain.run_config import RunConfig


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SLICING_", env_file=".env", case_sensitive=False)

    app_name: str = Field(default="Network Slicing Testbed")
    version: str = Field(default="0.1.0")
    environment: str = Field(default="development")
    log_level: str = Field(default="INFO")
    runs_root: str = Field(default="runs")


@lru_cache
def get_settings() -> Settings:
    return Settings()  # type: ignore[call-arg]


SLICE_PREFIX = "slice."
OVERRIDE_SOURCE = "<override>"

_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_LINE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")


class _Source:
    """Where each section and key came from, for error messages."""

    def __init__(self, path: str) -> None:
        self.path = path
        self.sections: dict[str, int] = {}
        self.keys: dict[tuple[str, str], int] = {}
        self.overridden: set[tuple[str, str]] = set()

    def index(self, text: str) -> None:
        section: Optional[str] = None
        for number, line in enumerate(text.splitlines(), start=1):
            header = _SECTION_LINE.match(line)
            if header:
                section = header.group(1).strip()
                self.sections.setdefault(section, number)
                continue
            key = _KEY_LINE.match(line)
            if key and section is not None:
                self.keys.setdefault((section, key.group(1).strip()), number)

    def locate(self, section: str, key: Optional[str] = None) -> str:
        if key is not None and (section, key) in self.overridden:
            return OVERRIDE_SOURCE
        line = self.keys.get((section, key)) if key is not None else None
        if line is None:
            line = self.sections.get(section)
        return f"{self.path}:{line}" if line is not None else self.path


def _split_override(item: str) -> tuple[str, str, str]:
    text = item[2:] if item.startswith("--") else item
    target, separator, value = text.partition("=")
    if not separator:
        raise ConfigurationError(f"{OVERRIDE_SOURCE}: expected --section.key=value, got {item!r}")
    target = target.strip()
    if target.startswith(SLICE_PREFIX):
        parts = target.split(".", 2)
        if len(parts) < 3:
            raise ConfigurationError(f"{OVERRIDE_SOURCE}: slice override needs slice.<name>.<key>, got {item!r}")
        return f"{SLICE_PREFIX}{parts[1]}", parts[2], value.strip()
    section, dot, key = target.partition(".")
    if not dot or not key:
        raise ConfigurationError(f"{OVERRIDE_SOURCE}: expected --section.key=value, got {item!r}")
    return section, key, value.strip()


def _nest(values: dict[str, str]) -> dict[str, Any]:
    """Turn dotted keys into nested dicts: a.b = 1 -> {"a": {"b": "1"}}."""
    nested: dict[str, Any] = {}
    for dotted, value in values.items():
        target = nested
        *parents, leaf = dotted.split(".")
        for parent in parents:
            target = target.setdefault(parent, {})
            if not isinstance(target, dict):
                raise ConfigurationError(f"key {dotted!r} conflicts with a scalar value")
        target[leaf] = value
    return nested


def _payload(sections: dict[str, dict[str, str]], source: _Source) -> dict[str, Any]:
    known = set(RunConfig.model_fields) - {"slices"}
    payload: dict[str, Any] = {}
    slices: list[dict[str, Any]] = []
    for section, values in sections.items():
        if section.startswith(SLICE_PREFIX):
            slice_values = _nest(values)
            slice_values["name"] = section[len(SLICE_PREFIX):]
            slices.append(slice_values)
        elif section in known:
            payload[section] = _nest(values)
        else:
            raise ConfigurationError(f"{source.locate(section)}: unknown section [{section}]")
    if slices:
        payload["slices"] = slices
    return payload


def _key_parts(node: Any, parts: Sequence[str]) -> list[str]:
    """Drop union tags pydantic inserts into error locations."""
    kept: list[str] = []
    for part in parts:
        if isinstance(node, dict) and part not in node and node.get("kind") == part:
            continue
        kept.append(part)
        node = node.get(part) if isinstance(node, dict) else None
    return kept


def _describe(error: dict[str, Any], payload: dict[str, Any], source: _Source) -> str:
    loc = [str(part) for part in error.get("loc", ())]
    message = error.get("msg", "invalid value")
    if not loc:
        return f"{source.path}: {message}"
    if loc[0] == "slices" and len(loc) > 1 and loc[1].isdigit():
        node = payload.get("slices", [])[int(loc[1])]
        section = f"{SLICE_PREFIX}{node.get('name', loc[1])}"
        key = ".".join(_key_parts(node, loc[2:]))
    else:
        section = loc[0]
        key = ".".join(_key_parts(payload.get(section, {}), loc[1:]))
    if not key:
        return f"{source.locate(section)}: [{section}] {message}"
    return f"{source.locate(section, key)}: [{section}] {key}: {message}"


def parse_run_config(
    text: str,
    *,
    path: str = "<config>",
    overrides: Sequence[str] = (),
) -> RunConfig:
    source = _Source(path)
    source.index(text)
    parser = configparser.ConfigParser(
        interpolation=None,
        inline_comment_prefixes=("#", ";"),
        strict=True,
    )
    parser.optionxform = str  # type: ignore[assignment]
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        location = f"{path}:{line}" if line else path
        raise ConfigurationError(f"{location}: {exc}") from exc

    sections: dict[str, dict[str, str]] = {
        name: dict(parser.items(name, raw=True)) for name in parser.sections()
    }
    for item in overrides:
        section, key, value = _split_override(item)
        sections.setdefault(section, {})[key] = value
        source.overridden.add((section, key))

    payload = _payload(sections, source)
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        details = "; ".join(_describe(error, payload, source) for error in exc.errors())
        raise ConfigurationError(details) from exc


def load_run_config(path: Optional[Path], overrides: Sequence[str] = ()) -> RunConfig:
    """Read an INI run configuration; a missing path yields the defaults."""
    if path is None:
        return parse_run_config("", path="<defaults>", overrides=overrides)
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"{config_path}: configuration file not found")
    return parse_run_config(
        config_path.read_text(encoding="utf-8"), path=str(config_path), overrides=overrides
    )


def run_config_from_echo(echo: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(echo)
    except ValidationError as exc:
        raise ConfigurationError(f"summary config echo is invalid: {exc.errors()[0]['msg']}") from exc
