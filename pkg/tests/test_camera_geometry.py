import math

import numpy as np
import pytest

from a3kit.camera_geometry import (
    CameraIntrinsics,
    CameraPose,
    DepthRange,
    depth_range_from,
    denormalize_depth,
    look_at,
    min_area_rect,
    normalize_point,
    normalize_points,
    project_points,
    unproject_normalized,
)
from a3kit.errors import DegenerateRangeError, DomainError, GeometryError
from a3kit.urdf_model import make_transform, rpy_matrix


def test_default_intrinsics() -> None:
    intr = CameraIntrinsics()
    assert (intr.width, intr.height) == (960, 960)
    assert intr.fx == intr.fy == 1000.0
    assert (intr.cx, intr.cy) == (480.0, 480.0)
    assert intr.scaled(0.5).fx == 500.0


def test_look_at_puts_target_on_the_principal_point(intrinsics) -> None:
    pose = look_at([2.0, 1.0, 1.5], [0.0, 0.0, 0.5])
    projected = project_points(intrinsics, pose, [[0.0, 0.0, 0.5]])
    assert np.allclose(projected.uv, [[480.0, 480.0]])
    assert projected.depth[0] == pytest.approx(math.sqrt(4 + 1 + 1))
    assert np.allclose(pose.eye, [2.0, 1.0, 1.5])


def test_image_axes_follow_right_and_down(intrinsics) -> None:
    pose = look_at([2.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    uv = project_points(intrinsics, pose, [[0.0, 0.1, 0.0], [0.0, 0.0, 0.1]]).uv
    # looking along -x with z up: world +y is image right, world +z is image up
    assert uv[0, 0] > 480.0
    assert uv[1, 1] < 480.0


def test_points_behind_the_camera_are_flagged(intrinsics) -> None:
    pose = look_at([1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    projected = project_points(intrinsics, pose, [[2.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert projected.behind.tolist() == [True, False]
    assert np.isnan(projected.uv[0]).all()
    assert projected.in_image(intrinsics).tolist() == [False, True]


def test_pose_rejects_non_rotations() -> None:
    with pytest.raises(GeometryError):
        CameraPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(GeometryError):
        CameraPose(2.0 * np.eye(3), np.zeros(3))
    with pytest.raises(GeometryError):
        look_at([0, 0, 1], [0, 0, 0])


def test_pose_round_trip_and_transformed() -> None:
    pose = look_at([1.0, -2.0, 0.7], [0.1, 0.2, 0.3])
    pts = np.random.default_rng(0).normal(size=(10, 3))
    assert np.allclose(pose.camera_to_world(pose.world_to_camera(pts)), pts)
    assert np.allclose(pose.inverse() @ pose.matrix, np.eye(4))

    transform = make_transform(rpy_matrix([0.3, -0.2, 1.1]), [0.5, 0.1, -0.4])
    moved = pose.transformed(transform)
    moved_pts = pts @ transform[:3, :3].T + transform[:3, 3]
    assert np.allclose(moved.world_to_camera(moved_pts), pose.world_to_camera(pts))


def test_depth_range_validation() -> None:
    with pytest.raises(DegenerateRangeError):
        DepthRange(1.0, 1.0)
    with pytest.raises(DomainError):
        DepthRange(-0.5, 1.0)


def test_depth_range_from_pads_flat_scenes() -> None:
    pose = look_at([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], up=(0.0, 1.0, 0.0))
    flat = [[0.0, 0.0, 0.0], [0.1, 0.1, 0.0], [-0.1, 0.05, 0.0]]
    depth_range = depth_range_from(pose, flat)
    assert depth_range.span == pytest.approx(1e-3)
    assert depth_range.z_min < 1.0 < depth_range.z_max


def test_normalize_point_clamps_to_unit_cube(intrinsics) -> None:
    depth_range = DepthRange(1.0, 3.0)
    point = normalize_point(intrinsics, depth_range, 240.0, 960.0, 2.5)
    assert point.as_tuple() == pytest.approx((0.25, 1.0, 0.75))
    clamped = normalize_point(intrinsics, depth_range, -10.0, 2000.0, 5.0)
    assert clamped.as_tuple() == (0.0, 1.0, 1.0)


def test_denormalize_depth_domain() -> None:
    depth_range = DepthRange(1.0, 3.0)
    assert denormalize_depth(depth_range, 0.25) == pytest.approx(1.5)
    assert np.allclose(denormalize_depth(depth_range, [0.0, 1.0]), [1.0, 3.0])
    with pytest.raises(DomainError):
        denormalize_depth(depth_range, 1.01)
    with pytest.raises(DomainError):
        denormalize_depth(depth_range, float("nan"))


def test_unproject_inverts_projection(intrinsics) -> None:
    pose = look_at([1.5, 0.8, 1.2], [0.0, 0.0, 0.3])
    pts = np.random.default_rng(1).uniform(-0.3, 0.3, size=(50, 3)) + [0.0, 0.0, 0.3]
    depth_range = depth_range_from(pose, pts)
    projected = project_points(intrinsics, pose, pts)
    uvz = np.column_stack(
        [
            projected.uv[:, 0] / intrinsics.width,
            projected.uv[:, 1] / intrinsics.height,
            depth_range.normalize(projected.depth),
        ]
    )
    assert np.allclose(unproject_normalized(intrinsics, depth_range, pose, uvz), pts, atol=1e-9)


def test_min_area_rect_of_rotated_rectangle() -> None:
    angle = math.radians(30.0)
    long_dir = np.array([math.cos(angle), math.sin(angle)])
    short_dir = np.array([-math.sin(angle), math.cos(angle)])
    rng = np.random.default_rng(2)
    coeffs = rng.uniform(-1.0, 1.0, size=(200, 2)) * [2.0, 1.0]
    corners = np.array([[-2, -1], [2, -1], [2, 1], [-2, 1]], dtype=float)
    local = np.vstack([coeffs, corners])
    pts = np.array([3.0, -1.0]) + local[:, :1] * long_dir + local[:, 1:] * short_dir

    rect = min_area_rect(pts)
    assert rect.half_extents == pytest.approx([2.0, 1.0])
    assert rect.angle == pytest.approx(angle)
    assert rect.center == pytest.approx([3.0, -1.0])
    assert rect.area == pytest.approx(8.0)
    assert rect.contains(pts).all()
    assert not rect.degenerate


def test_min_area_rect_square_tie_prefers_smallest_angle() -> None:
    rect = min_area_rect([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
    assert rect.angle == pytest.approx(0.0)
    assert rect.half_extents == pytest.approx([0.5, 0.5])


def test_min_area_rect_degenerate_inputs() -> None:
    single = min_area_rect([[2.0, 3.0]])
    assert single.degenerate
    assert single.center == pytest.approx([2.0, 3.0])
    assert single.area == 0.0

    line = min_area_rect([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
    assert line.degenerate
    assert line.angle == pytest.approx(math.pi / 4)
    assert line.half_extents[0] == pytest.approx(math.sqrt(2.0))
    assert line.half_extents[1] == pytest.approx(0.0, abs=1e-12)

    with pytest.raises(DomainError):
        min_area_rect(np.empty((0, 2)))


def test_normalized_points_ignore_image_scale(intrinsics) -> None:
    pose = look_at([2.0, 1.0, 1.5], [0.0, 0.0, 0.3])
    points = np.random.default_rng(4).uniform(-0.3, 0.3, size=(50, 3)) + [0.0, 0.0, 0.3]
    depth_range = depth_range_from(pose, points)

    def normalized(intr):
        projected = project_points(intr, pose, points)
        return normalize_points(intr, depth_range, projected.uv, projected.depth)

    doubled = intrinsics.scaled(2.0)
    assert (doubled.width, doubled.fx, doubled.cx) == (1920, 2000.0, 960.0)
    assert np.abs(normalized(doubled) - normalized(intrinsics)).max() <= 1e-12
