from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError

from a3kit.annotation import SemanticLabel, Triad
from a3kit.dataset_builder import (
    PROMPTS,
    DatasetSettings,
    SubTask,
    build_object_dataset,
    build_samples,
    camera_on_sphere,
    detection_answer,
    format_triad_text,
    instruction_for,
    object_bounds,
    sample_views,
)
from a3kit.errors import DomainError
from a3kit.model_io import parse_triad_answer


def make_triad(link: str, name: str, kind: str, actions: tuple[str, ...], seed: int = 0) -> Triad:
    rng = np.random.default_rng(seed)
    return Triad(
        box_norm=rng.uniform(0.1, 0.9, size=(8, 3)),
        axis_norm=rng.uniform(0.1, 0.9, size=(2, 3)),
        label=SemanticLabel(kind, name, actions),
        link=link,
        visibility=0.8,
    )


@pytest.fixture
def triads() -> list[Triad]:
    return [
        make_triad("drawer_1", "drawer", "prismatic", ("slide_out",), seed=1),
        make_triad("door_1", "door", "revolute", ("flap_open", "StatusComplete"), seed=2),
    ]


def test_unit_multipliers_give_one_sample_per_slot(triads) -> None:
    samples = build_samples(triads, "images/cab_000.png", seed=7)
    counts = Counter(s.task for s in samples)
    assert counts == {
        SubTask.DETECTION: 1,
        SubTask.REC_LINK: 2,
        SubTask.REG_JOINT: 2,
        SubTask.REC_ACTION: 3,
    }
    assert all(s.image == "images/cab_000.png" for s in samples)
    assert samples[0].links == ["drawer_1", "door_1"]


def test_samples_are_deterministic(triads) -> None:
    first = build_samples(triads, "img.png", seed=3, multipliers={"RECLink": 3})
    second = build_samples(triads, "img.png", seed=3, multipliers={"RECLink": 3})
    assert [s.model_dump() for s in first] == [s.model_dump() for s in second]


def test_multipliers_pick_distinct_wordings(triads) -> None:
    samples = build_samples(triads, "img.png", seed=0, multipliers={"RECLink": 3, "Detection": 99})
    rec = [s for s in samples if s.task is SubTask.REC_LINK and s.links == ["drawer_1"]]
    assert len(rec) == 3
    assert len({s.prompt for s in rec}) == 3
    detection = [s for s in samples if s.task is SubTask.DETECTION]
    assert len(detection) == len(PROMPTS[SubTask.DETECTION])


def test_no_triads_no_samples() -> None:
    assert build_samples([], "img.png", seed=0) == []


def test_answers_follow_the_grammar(triads) -> None:
    samples = build_samples(triads, "img.png", seed=5)
    for sample in samples:
        parsed = parse_triad_answer(sample.answer, sample.task)
        if sample.task is SubTask.DETECTION:
            assert len(parsed.boxes) == 2
    action = next(s for s in samples if s.task is SubTask.REC_ACTION)
    assert action.answer.startswith("Action type: slide_out, bounding box: [(")
    assert "Pull out the drawer" in action.prompt


def test_detection_answer_wording(triads) -> None:
    assert detection_answer(triads[:1]).startswith(
        "There is one manipulable object part with its 3D bounding box: drawer: [("
    )
    assert detection_answer(triads).startswith("There are two manipulable object parts")


def test_format_triad_text() -> None:
    triad = Triad(
        box_norm=np.tile([0.125, 0.5, 0.0], (8, 1)),
        axis_norm=np.array([[0.4, 0.5, 0.3], [0.6, 0.5, 0.31]]),
        label=SemanticLabel("revolute", "door", ("flap_open", "flap_close")),
        link="door_1",
        visibility=1.0,
    )
    box_text, axis_text, label_text = format_triad_text(triad)
    assert box_text == "[" + ", ".join(["(0.13,0.50,0.00)"] * 8) + "]"
    assert axis_text == "[(0.40,0.50,0.30), (0.60,0.50,0.31)]"
    assert label_text == "door, revolute, flap_open flap_close"


def test_instruction_for() -> None:
    assert instruction_for("flap_open", "oven door") == "Open the oven door"


def test_camera_on_sphere_looks_at_center() -> None:
    pose = camera_on_sphere([1.0, 2.0, 0.5], 2.0, 30.0, 90.0)
    center_cam = pose.world_to_camera([[1.0, 2.0, 0.5]])[0]
    assert center_cam[:2] == pytest.approx([0.0, 0.0], abs=1e-9)
    assert center_cam[2] == pytest.approx(2.0)


def test_sample_views_are_seeded(door) -> None:
    tree, _ = door
    first = sample_views(tree, 3, master_seed=11, object_id="door")
    again = sample_views(tree, 3, master_seed=11, object_id="door")
    other = sample_views(tree, 3, master_seed=12, object_id="door")
    assert [v.seed for v in first] == [v.seed for v in again]
    assert np.array_equal(first[2].pose.matrix, again[2].pose.matrix)
    assert not np.array_equal(first[0].pose.matrix, other[0].pose.matrix)
    assert first[1].image_ref == "images/door_001.png"
    center, radius = object_bounds(tree)
    for view in first:
        distance = np.linalg.norm(view.pose.eye - center)
        assert 1.5 * radius - 1e-9 <= distance <= 3.0 * radius + 1e-9
    with pytest.raises(DomainError):
        sample_views(tree, 0)


def test_object_dataset_structure(drawer_cabinet) -> None:
    tree, fixture = drawer_cabinet
    settings = DatasetSettings(views=3, sample_count=512)
    dataset = build_object_dataset(tree, "cabinet", fixture.category, master_seed=4, settings=settings)

    assert len(dataset.manifests) == len(dataset.annotations) == 3
    per_image = Counter(s.image for s in dataset.samples)
    for record in dataset.annotations:
        links = len(record.triads)
        expected = 0 if links == 0 else 1 + 2 * links + sum(len(t.actions) for t in record.triads)
        assert per_image.get(record.image, 0) == expected
        for triad in record.triads:
            assert triad.joint in {"prismatic", "revolute"}
            assert np.all((np.array(triad.bbox) >= 0.0) & (np.array(triad.bbox) <= 1.0))
    manifest = dataset.manifests[0]
    assert manifest.intrinsics["width"] == 960
    assert set(manifest.joints) == {"drawer_top_slide", "drawer_bottom_slide", "door_hinge"}


def test_dataset_settings_validation() -> None:
    assert DatasetSettings().views == 40
    assert DatasetSettings().multipliers["REGJoint"] == 1
    with pytest.raises(ValidationError):
        DatasetSettings(views=0)
