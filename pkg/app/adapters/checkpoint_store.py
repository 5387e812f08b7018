import json
import logging

from pathlib import Path
from typing import Any, Optional, Protocol

from app.core.errors import CheckpointFormatError
from app.services import neural
from app.services.neural import DenseNetwork
from app.util.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION

MANIFEST_FILE = "manifest.json"
SECTION_SUFFIX = ".dnaf"


class CheckpointStore(Protocol):
    def save(
        self,
        directory: Path,
        agent: str,
        networks: dict[str, DenseNetwork],
        metadata: Optional[dict[str, Any]] = None,
    ) -> Path:
        ...

    def load(self, directory: Path) -> tuple[dict[str, Any], dict[str, DenseNetwork]]:
        ...


class FileCheckpointStore(CheckpointStore):
    """One binary file per network section plus a JSON manifest naming roles and dims."""

    def __init__(self) -> None:
        self._logger = logging.getLogger(self.__class__.__name__)

    def save(
        self,
        directory: Path,
        agent: str,
        networks: dict[str, DenseNetwork],
        metadata: Optional[dict[str, Any]] = None,
    ) -> Path:
        target = Path(directory)
        target.mkdir(parents=True, exist_ok=True)
        sections = []
        for role, net in networks.items():
            filename = f"{role}{SECTION_SUFFIX}"
            neural.save(net, target / filename)
            sections.append(
                {
                    "role": role,
                    "file": filename,
                    "dims": net.layer_dims,
                    "output_activation": net.output_activation,
                }
            )
        manifest = {
            "format": CHECKPOINT_MAGIC.decode("ascii"),
            "version": CHECKPOINT_VERSION,
            "agent": agent,
            "sections": sections,
            **(metadata or {}),
        }
        (target / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        self._logger.info("checkpoint for %s written to %s", agent, target)
        return target

    def load(self, directory: Path) -> tuple[dict[str, Any], dict[str, DenseNetwork]]:
        source = Path(directory)
        manifest_path = source / MANIFEST_FILE
        if not manifest_path.is_file():
            raise FileNotFoundError(str(manifest_path))
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CheckpointFormatError(f"{manifest_path}: {exc}") from exc
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"{manifest_path}: unsupported version {manifest.get('version')}")

        networks: dict[str, DenseNetwork] = {}
        for section in manifest.get("sections", []):
            try:
                role = section["role"]
                path = source / section["file"]
                dims = section["dims"]
                activation = section.get("output_activation", "identity")
            except KeyError as exc:
                raise CheckpointFormatError(f"{manifest_path}: section lacks {exc}") from exc
            if not path.is_file():
                raise FileNotFoundError(str(path))
            networks[role] = neural.load(path, expected_dims=dims, output_activation=activation)
        if not networks:
            raise CheckpointFormatError(f"{manifest_path}: no network sections")
        return manifest, networks
