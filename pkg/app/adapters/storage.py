import json

from pathlib import Path
from typing import Any, Optional, Protocol

from app.core.config import get_settings


class Storage(Protocol):
    @property
    def root(self) -> Path:
        ...

    def path(self, name: str) -> Path:
        ...

    def child(self, name: str) -> "Storage":
        ...

    def write_json(self, name: str, payload: Any) -> Path:
        ...

    def read_json(self, name: str) -> Any:
        ...


class LocalStorage(Storage):
    """A run directory on the local filesystem."""

    def __init__(self, root: Optional[Path] = None) -> None:
        self._root = Path(root or get_settings().runs_root)
        self._root.mkdir(parents=True, exist_ok=True)

    @property
    def root(self) -> Path:
        return self._root

    def path(self, name: str) -> Path:
        return self._root / name

    def child(self, name: str) -> "LocalStorage":
        return LocalStorage(self._root / name)

    def write_json(self, name: str, payload: Any) -> Path:
        target = self.path(name)
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return target

    def read_json(self, name: str) -> Any:
        target = self.path(name)
        if not target.is_file():
            raise FileNotFoundError(str(target))
        return json.loads(target.read_text(encoding="utf-8"))
