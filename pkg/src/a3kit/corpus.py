"""Object corpora: the bundled fixtures, a directory of URDFs, or a local PartNet-Mobility checkout."""

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError
from .logging_config import configure_logging
from .urdf_model import KinematicTree, load_semantics, load_urdf

# Logging Configuration
logger = configure_logging()


@dataclass(frozen=True, eq=False)
class CorpusObject:
    object_id: str
    category: str
    tree: KinematicTree
    semantics: Mapping[str, str] = field(default_factory=dict)


class PartNetImport(BaseModel):
    """Importer settings for a PartNet-Mobility checkout laid out as `<root>/<id>/mobility.urdf`."""

    model_config = ConfigDict(extra="forbid")

    root: Path
    categories: list[str] | None = None
    max_objects: int | None = Field(default=None, ge=1)


def _read_sidecar(path: Path) -> dict:
    if not path.is_file():
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid sidecar {path}: {e}") from e


def load_directory(directory: str | Path) -> list[CorpusObject]:
    """Every `*.urdf` in `directory`, with category and semantics from a `<name>.json` sidecar."""
    directory = Path(directory)
    objects = []
    for urdf_path in sorted(directory.glob("*.urdf")):
        sidecar = _read_sidecar(urdf_path.with_suffix(".json"))
        objects.append(
            CorpusObject(
                object_id=urdf_path.stem,
                category=sidecar.get("category", ""),
                tree=load_urdf(urdf_path),
                semantics=sidecar.get("semantics", {}),
            )
        )
    return objects


def load_partnet(settings: PartNetImport) -> list[CorpusObject]:
    root = settings.root.expanduser()
    if not root.is_dir():
        raise ConfigError(f"PartNet-Mobility root {root} is not a directory")
    wanted = {c.lower() for c in settings.categories} if settings.categories else None
    objects = []
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        urdf_path = entry / "mobility.urdf"
        if not urdf_path.is_file():
            continue
        category = _read_sidecar(entry / "meta.json").get("model_cat", "")
        if wanted is not None and category.lower() not in wanted:
            continue
        semantics_path = entry / "semantics.txt"
        semantics = load_semantics(semantics_path) if semantics_path.is_file() else {}
        objects.append(CorpusObject(entry.name, category, load_urdf(urdf_path), semantics))
        if settings.max_objects is not None and len(objects) >= settings.max_objects:
            break
    logger.info("PartNet-Mobility objects loaded", root=str(root), objects=len(objects))
    return objects


def load_corpus(source: str | Path) -> list[CorpusObject]:
    """Resolve a corpus source: "fixtures", a URDF directory, a single URDF or an importer TOML."""
    if str(source) == "fixtures":
        from .fixtures import FIXTURE_DIR

        return load_directory(FIXTURE_DIR)
    path = Path(source)
    if path.is_dir():
        return load_directory(path)
    if path.suffix == ".urdf":
        sidecar = _read_sidecar(path.with_suffix(".json"))
        return [
            CorpusObject(
                path.stem, sidecar.get("category", ""), load_urdf(path), sidecar.get("semantics", {})
            )
        ]
    if path.suffix == ".toml":
        try:
            settings = PartNetImport.model_validate(toml.load(path))
        except (OSError, toml.TomlDecodeError, ValidationError) as e:
            raise ConfigError(f"Invalid importer config {path}: {e}") from e
        return load_partnet(settings)
    raise ConfigError(f"Unrecognized corpus source: {source}")
