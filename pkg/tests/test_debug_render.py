import pytest
import trimesh

from a3kit.annotation import annotate_scene
from a3kit.camera_geometry import look_at
from a3kit.debug_render import render_view_svg, write_point_cloud_ply
from a3kit.urdf_model import middle_joint_values


@pytest.fixture
def door_view(door, intrinsics):
    tree, _ = door
    pose = look_at([2.0, 1.2, 0.9], [0.0, 0.26, 0.4])
    return annotate_scene(tree, middle_joint_values(tree), intrinsics, pose, sample_count=512)


def test_svg_overlay(door_view, tmp_path) -> None:
    assert door_view.triads
    path = render_view_svg(door_view, tmp_path / "door.svg", title="door_000")
    text = path.read_text()
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text


def test_ply_cloud_colors_annotated_links(door_view, tmp_path) -> None:
    path = write_point_cloud_ply(door_view, tmp_path / "door.ply")
    cloud = trimesh.load(path)
    assert len(cloud.vertices) == len(door_view.visible_cloud)
    door_points = door_view.visible_links == "door"
    assert door_points.any()
    assert (cloud.colors[door_points][:, :3] != 160).any(axis=1).all()
