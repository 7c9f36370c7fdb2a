import json

import pytest

from a3kit.corpus import PartNetImport, load_corpus, load_partnet
from a3kit.errors import ConfigError
from a3kit.fixtures import FIXTURE_NAMES

from conftest import BOX_HINGE_URDF, SLIDER_URDF


def _partnet_checkout(root):
    checkout = [("1001", "Box", BOX_HINGE_URDF), ("1002", "Rail", SLIDER_URDF), ("1003", "Box", BOX_HINGE_URDF)]
    for object_id, category, urdf in checkout:
        entry = root / object_id
        entry.mkdir(parents=True)
        (entry / "mobility.urdf").write_text(urdf)
        (entry / "meta.json").write_text(json.dumps({"model_cat": category}))
    (root / "1001" / "semantics.txt").write_text("flap hinge lid\nbase free box\n")
    (root / "notes").mkdir()
    return root


def test_bundled_fixtures() -> None:
    corpus = load_corpus("fixtures")
    assert sorted(obj.object_id for obj in corpus) == sorted(FIXTURE_NAMES)
    door = next(obj for obj in corpus if obj.object_id == "door")
    assert door.category == "Door"
    assert door.semantics == {"door": "door"}


def test_single_urdf_with_sidecar(tmp_path) -> None:
    (tmp_path / "box.urdf").write_text(BOX_HINGE_URDF)
    (tmp_path / "box.json").write_text(json.dumps({"category": "Box", "semantics": {"flap": "lid"}}))
    (obj,) = load_corpus(tmp_path / "box.urdf")
    assert obj.object_id == "box"
    assert obj.category == "Box"
    assert obj.semantics["flap"] == "lid"


def test_directory_without_sidecars(tmp_path) -> None:
    (tmp_path / "a.urdf").write_text(BOX_HINGE_URDF)
    (tmp_path / "b.urdf").write_text(SLIDER_URDF)
    corpus = load_corpus(tmp_path)
    assert [obj.object_id for obj in corpus] == ["a", "b"]
    assert corpus[1].category == ""


def test_partnet_importer(tmp_path) -> None:
    root = _partnet_checkout(tmp_path / "partnet")
    corpus = load_partnet(PartNetImport(root=root))
    assert [obj.object_id for obj in corpus] == ["1001", "1002", "1003"]
    assert corpus[0].semantics == {"flap": "lid", "base": "box"}

    boxes = load_partnet(PartNetImport(root=root, categories=["box"], max_objects=1))
    assert [obj.object_id for obj in boxes] == ["1001"]

    config = tmp_path / "importer.toml"
    config.write_text(f'root = "{root.as_posix()}"\ncategories = ["Rail"]\n')
    assert [obj.object_id for obj in load_corpus(config)] == ["1002"]


def test_corpus_errors(tmp_path) -> None:
    with pytest.raises(ConfigError):
        load_corpus(tmp_path / "objects.csv")
    with pytest.raises(ConfigError):
        load_partnet(PartNetImport(root=tmp_path / "missing"))
    bad = tmp_path / "importer.toml"
    bad.write_text("root = \n")
    with pytest.raises(ConfigError):
        load_corpus(bad)
    (tmp_path / "box.urdf").write_text(BOX_HINGE_URDF)
    (tmp_path / "box.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_corpus(tmp_path / "box.urdf")
