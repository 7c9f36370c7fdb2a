import json
import math

import numpy as np
import pytest

from a3kit.annotation import AxisSegment, OrientedBox3D, SemanticLabel
from a3kit.errors import ContactError, DegenerateTrajectoryError, GeometryError
from a3kit.primitives import (
    Direction,
    GraspPose,
    PrimitiveKind,
    PrimitiveParams,
    Trajectory,
    choose_contact,
    choose_grasp,
    default_params,
    plan_trajectory,
    select_primitive,
    trajectories_to_json,
)

Z_AXIS = AxisSegment([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], "revolute")


@pytest.fixture
def plate() -> OrientedBox3D:
    # 0.4 x 0.2 x 0.02 plate centred at (1, 0, 0.5)
    return OrientedBox3D([1.0, 0.0, 0.5], np.eye(3), [0.2, 0.1, 0.01])


@pytest.mark.parametrize(
    ("kind", "name", "expected"),
    [
        ("prismatic", "knob", PrimitiveKind.SLIDE),
        ("revolute", "door", PrimitiveKind.ROTATE),
        ("revolute", "Bottle_Cap", PrimitiveKind.SCROLL),
        ("revolute", "volume knob", PrimitiveKind.SCROLL),
        ("revolute", "scroll  button", PrimitiveKind.SCROLL),
        ("revolute", "capsule", PrimitiveKind.ROTATE),
    ],
)
def test_select_primitive(kind, name, expected) -> None:
    assert select_primitive(SemanticLabel(kind, name)) is expected


def test_contact_lies_in_shrunk_region_and_is_seeded(plate) -> None:
    rng = np.random.default_rng(0)
    points = rng.uniform([0.75, -0.15, 0.45], [1.25, 0.15, 0.55], size=(2000, 3))
    contact = choose_contact(plate, points, PrimitiveKind.ROTATE, Z_AXIS, seed=3)
    local = np.abs(contact - plate.center)
    assert local[0] <= 0.15 + 1e-12
    assert local[1] <= 0.075 + 1e-12
    assert local[2] <= 0.01 + 1e-12
    assert plate.contains(contact).all()
    assert np.array_equal(contact, choose_contact(plate, points, PrimitiveKind.ROTATE, Z_AXIS, seed=3))


@pytest.mark.parametrize("kind", [PrimitiveKind.SLIDE, PrimitiveKind.SCROLL, PrimitiveKind.ROTATE])
def test_points_just_outside_the_box_are_not_contacts(plate, kind) -> None:
    # 8 mm above a plate whose half-thickness is 1 cm
    points = np.array([[1.0, 0.0, 0.518]])
    assert not plate.contains(points).any()
    with pytest.raises(ContactError):
        choose_contact(plate, points, kind, Z_AXIS, seed=0)
    padded = plate.padded(0.01)
    assert padded.half_extents.tolist() == pytest.approx([0.2, 0.1, 0.02])
    assert np.array_equal(choose_contact(padded, points, kind, Z_AXIS, seed=0), points[0])


def test_scroll_contact_is_nearest_the_axis() -> None:
    knob = OrientedBox3D([0.0, 0.0, 0.5], np.eye(3), [0.05, 0.05, 0.05])
    points = np.array([[0.04, 0.0, 0.5], [0.01, 0.01, 0.52], [0.03, -0.03, 0.48], [2.0, 0.0, 0.5]])
    contact = choose_contact(knob, points, PrimitiveKind.SCROLL, Z_AXIS, seed=0)
    assert contact == pytest.approx([0.01, 0.01, 0.52])


def test_no_points_in_box(plate) -> None:
    with pytest.raises(ContactError):
        choose_contact(plate, [[5.0, 5.0, 5.0]], PrimitiveKind.SLIDE, Z_AXIS, seed=0)


def test_choose_grasp_returns_a_candidate(plate) -> None:
    candidates = [
        GraspPose.from_position([9.0, 0.0, 0.0]),
        GraspPose.from_position([1.05, 0.02, 0.5], score=0.9),
    ]
    assert choose_grasp(plate, candidates, PrimitiveKind.ROTATE, Z_AXIS, seed=1) is candidates[1]
    assert candidates[1].rotation[:, 2] == pytest.approx([0.0, 0.0, -1.0])
    with pytest.raises(GeometryError):
        GraspPose([0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0])


def test_rotate_keeps_radius_and_sweeps_arc() -> None:
    contact = np.array([0.5, 0.0, 0.3])
    trajectory = plan_trajectory(PrimitiveKind.ROTATE, contact, Z_AXIS)
    radii = np.linalg.norm(trajectory.positions[:, :2], axis=1)
    assert radii == pytest.approx(np.full(len(trajectory), 0.5))
    assert trajectory.positions[:, 2] == pytest.approx(np.full(len(trajectory), 0.3))
    end = trajectory.positions[-1]
    assert math.degrees(math.atan2(end[1], end[0])) == pytest.approx(30.0)
    assert len(trajectory) == 16
    heading = trajectory.rotations[-1] @ [1.0, 0.0, 0.0]
    assert np.allclose(heading[:2], end[:2] / 0.5)
    assert heading[2] == pytest.approx(0.0, abs=1e-12)


def test_backward_mirrors_forward() -> None:
    contact = np.array([0.5, 0.0, 0.3])
    forward = plan_trajectory(PrimitiveKind.ROTATE, contact, Z_AXIS)
    backward = plan_trajectory(PrimitiveKind.ROTATE, contact, Z_AXIS, direction=Direction.BACKWARD)
    mirror = backward.positions * [1.0, -1.0, 1.0]
    assert mirror == pytest.approx(forward.positions)
    assert backward.direction is Direction.BACKWARD


def test_slide_moves_along_axis() -> None:
    axis = AxisSegment([0.0, 0.0, 0.0], [0.0, 2.0, 0.0], "prismatic")
    params = PrimitiveParams(slide_m=0.05, n_waypoints=5)
    trajectory = plan_trajectory(PrimitiveKind.SLIDE, [1.0, 1.0, 1.0], axis, params)
    assert trajectory.positions[-1] == pytest.approx([1.0, 1.05, 1.0])
    assert trajectory.positions[2] == pytest.approx([1.0, 1.025, 1.0])
    assert np.allclose(trajectory.rotations, np.eye(3))


def test_scroll_turns_in_place() -> None:
    trajectory = plan_trajectory(PrimitiveKind.SCROLL, [0.0, 0.0, 0.4], Z_AXIS)
    assert np.allclose(trajectory.positions, [0.0, 0.0, 0.4])
    assert not np.allclose(trajectory.rotations[-1], np.eye(3))


def test_rotate_on_axis_is_degenerate() -> None:
    with pytest.raises(DegenerateTrajectoryError):
        plan_trajectory(PrimitiveKind.ROTATE, [0.0, 0.0, 0.7], Z_AXIS)


def test_trajectory_contract() -> None:
    with pytest.raises(DegenerateTrajectoryError):
        Trajectory(np.tile(np.eye(4), (1, 1, 1)), [0.0, 0.0, 0.0], PrimitiveKind.SLIDE, Direction.FORWARD)
    with pytest.raises(DegenerateTrajectoryError):
        Trajectory(np.tile(np.eye(4), (2, 1, 1)), [1.0, 0.0, 0.0], PrimitiveKind.SLIDE, Direction.FORWARD)


def test_default_params_caps_slide_to_remaining_travel(slider, box_hinge) -> None:
    slide = slider.joint("slide")
    # limits -0.2 .. 0.2: 5 cm left forward, 35 cm backward
    assert default_params(slide, 0.15).slide_m == pytest.approx(0.025)
    assert default_params(slide, 0.15, direction=Direction.BACKWARD).slide_m == pytest.approx(0.1)
    assert default_params(slide, -0.16, direction=Direction.BACKWARD).slide_m == pytest.approx(0.02)
    assert default_params(slide, 0.2).slide_m == pytest.approx(0.1)
    assert default_params(slide, 0.0, PrimitiveParams(slide_m=0.5)).slide_m == pytest.approx(0.1)
    assert default_params(box_hinge.joint("hinge"), 0.0).arc_deg == 30.0


def test_trajectories_json() -> None:
    trajectory = plan_trajectory(PrimitiveKind.SCROLL, [0.0, 0.0, 0.4], Z_AXIS, PrimitiveParams(n_waypoints=2))
    document = json.loads(trajectories_to_json([trajectory], object_id="bottle", link="cap"))
    assert document["object_id"] == "bottle"
    record = document["trajectories"][0]
    assert record["kind"] == "Scroll"
    assert len(record["waypoints"]) == 2
    assert len(record["waypoints"][0]) == 16
    assert record["contact"] == [0.0, 0.0, 0.4]
