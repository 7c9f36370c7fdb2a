import numpy as np
import pytest

from a3kit.annotation import compute_axis, compute_box
from a3kit.errors import FixtureNotFoundError
from a3kit.fixtures import FIXTURE_NAMES, load_fixture
from a3kit.urdf_model import JointConfig, apply_transform, forward_kinematics, sample_link_points


def _zero_config(tree) -> JointConfig:
    return JointConfig({joint.name: 0.0 for joint in tree.joints if joint.kind.movable})


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_matches_its_expectations(name) -> None:
    tree, fixture = load_fixture(name)
    fk = forward_kinematics(tree, _zero_config(tree))
    assert fixture.parts
    for part in fixture.parts:
        center = apply_transform(fk[part.link], part.box_center_local)[0]
        axis = compute_axis(tree, fk, part.link, center, 0.1)
        expected_direction = np.array(part.axis_direction) / np.linalg.norm(part.axis_direction)
        assert axis.kind == part.joint_kind
        assert axis.direction == pytest.approx(expected_direction, abs=1e-9)
        assert axis.distance_to_line(part.axis_point)[0] == pytest.approx(0.0, abs=1e-9)

        points = sample_link_points(tree, part.link, 4096, seed=0).in_world(fk[part.link])
        box = compute_box(points, axis)
        assert box.center == pytest.approx(center, abs=0.01)
        assert box.half_extents == pytest.approx(part.half_extents, abs=0.01)


def test_semantics_cover_every_part() -> None:
    for name in FIXTURE_NAMES:
        _, fixture = load_fixture(name)
        assert fixture.category
        for part in fixture.parts:
            assert part.link in fixture.semantics


def test_unknown_fixture_and_part() -> None:
    with pytest.raises(FixtureNotFoundError):
        load_fixture("teapot")
    _, fixture = load_fixture("door")
    assert fixture.part("door").joint_kind == "revolute"
    with pytest.raises(FixtureNotFoundError):
        fixture.part("frame")
