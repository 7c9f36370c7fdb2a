"""Per-view articulation annotations: bounding box, axis and semantic label for every visible movable link."""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .camera_geometry import (
    CameraIntrinsics,
    CameraPose,
    DepthRange,
    depth_range_from,
    min_area_rect,
    normalize_points,
)
from .config import (
    DEFAULT_SAMPLE_COUNT,
    DEGENERATE_HALF_EXTENT,
    VISIBILITY_MIN,
    Z_EPS,
    ZBUFFER_DEPTH_TOL,
    ZBUFFER_REL_TOL,
    ZBUFFER_RES,
)
from .errors import DomainError, GeometryError, NotMovableError
from .logging_config import configure_logging
from .skills import LabelDB, joint_state, label_kind
from .urdf_model import (
    JointConfig,
    JointKind,
    KinematicTree,
    SurfacePoints,
    apply_transform,
    forward_kinematics,
    frozen_array,
    joint_frame_world,
    link_mesh,
    sample_object_points,
)

# Logging Configuration
logger = configure_logging()

# Vertex order of every box: bit 0 -> x, bit 1 -> y (Gray-coded per face), bit 2 -> z
VERTEX_SIGNS = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=float,
)

BOX_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)  # fmt: skip


def _unit(vector) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector)
    if norm < 1e-12:
        raise GeometryError("Zero-length direction")
    return vector / norm


@dataclass(frozen=True, eq=False)
class AxisSegment:
    p0: np.ndarray
    p1: np.ndarray
    kind: str  # "revolute" | "prismatic"

    def __post_init__(self):
        object.__setattr__(self, "p0", frozen_array(self.p0))
        object.__setattr__(self, "p1", frozen_array(self.p1))
        if np.linalg.norm(self.p1 - self.p0) < 1e-12:
            raise GeometryError("Axis segment endpoints coincide")

    @property
    def direction(self) -> np.ndarray:
        return _unit(self.p1 - self.p0)

    @property
    def midpoint(self) -> np.ndarray:
        return (self.p0 + self.p1) / 2.0

    @property
    def half_length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0) / 2.0)

    def distance_to_line(self, points) -> np.ndarray:
        offsets = np.asarray(points, dtype=float).reshape(-1, 3) - self.p0
        direction = self.direction
        return np.linalg.norm(offsets - np.outer(offsets @ direction, direction), axis=1)

    def transformed(self, transform: np.ndarray) -> "AxisSegment":
        p0, p1 = apply_transform(transform, [self.p0, self.p1])
        return AxisSegment(p0, p1, self.kind)


@dataclass(frozen=True, eq=False)
class OrientedBox3D:
    center: np.ndarray
    axes: np.ndarray  # rows x, y, z
    half_extents: np.ndarray
    vertices: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", frozen_array(self.center))
        object.__setattr__(self, "axes", frozen_array(self.axes))
        object.__setattr__(self, "half_extents", frozen_array(self.half_extents))
        vertices = self.center + (VERTEX_SIGNS * self.half_extents) @ self.axes
        object.__setattr__(self, "vertices", frozen_array(vertices))

    @classmethod
    def from_vertices(cls, vertices) -> "OrientedBox3D":
        """Rebuild a box from 8 vertices in the canonical sign order.

        Noisy vertices are averaged per face pair. The two longest directions fix the
        frame and the shortest one follows from right-handedness, so a box flattened by
        quantization keeps a valid frame with its collapsed half-extent floored.
        """
        vertices = np.asarray(vertices, dtype=float).reshape(8, 3)
        center = vertices.mean(axis=0)
        raw = VERTEX_SIGNS.T @ (vertices - center) / 8.0
        half_extents = np.linalg.norm(raw, axis=1)
        first, second, third = np.argsort(-half_extents, kind="stable")
        if half_extents[first] < 1e-12:
            raise GeometryError("Box vertices coincide")
        axes = np.zeros((3, 3))
        axes[first] = raw[first] / half_extents[first]
        rest = raw[second] - (raw[second] @ axes[first]) * axes[first]
        if np.linalg.norm(rest) < 1e-12:
            rest = _perpendicular_basis(axes[first])[0]
        axes[second] = _unit(rest)
        axes[third] = np.cross(axes[(third + 1) % 3], axes[(third + 2) % 3])
        return cls(center, axes, np.maximum(half_extents, DEGENERATE_HALF_EXTENT))

    @property
    def volume(self) -> float:
        return float(8.0 * np.prod(self.half_extents))

    def local(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float).reshape(-1, 3) - self.center) @ self.axes.T

    def contains(self, points, inflate: float = 0.0) -> np.ndarray:
        return np.all(np.abs(self.local(points)) <= self.half_extents + inflate, axis=1)

    def padded(self, margin: float) -> "OrientedBox3D":
        """Same box grown by `margin` on both sides of its smallest extent."""
        half_extents = self.half_extents.copy()
        half_extents[int(np.argmin(half_extents))] += margin
        return OrientedBox3D(self.center, self.axes, half_extents)

    def transformed(self, transform: np.ndarray) -> "OrientedBox3D":
        rotation = np.asarray(transform, dtype=float)[:3, :3]
        center = apply_transform(transform, self.center)[0]
        return OrientedBox3D(center, self.axes @ rotation.T, self.half_extents)


@dataclass(frozen=True)
class SemanticLabel:
    joint_kind: str  # "revolute" | "prismatic"
    link_name: str
    actions: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class Triad:
    box_norm: np.ndarray  # (8, 3) normalized (u, v, z)
    axis_norm: np.ndarray  # (2, 3)
    label: SemanticLabel
    link: str
    visibility: float

    def __post_init__(self):
        object.__setattr__(self, "box_norm", frozen_array(self.box_norm))
        object.__setattr__(self, "axis_norm", frozen_array(self.axis_norm))


@dataclass(frozen=True, eq=False)
class ViewAnnotation:
    """Triads of one view plus the world-frame geometry they were derived from."""

    triads: tuple[Triad, ...]
    boxes: Mapping[str, OrientedBox3D]
    axes: Mapping[str, AxisSegment]
    depth_range: DepthRange
    intrinsics: CameraIntrinsics
    pose: CameraPose
    visible_cloud: np.ndarray
    visible_links: np.ndarray


def compute_axis(
    tree: KinematicTree,
    fk: Mapping[str, np.ndarray],
    link: str,
    centroid_world,
    half_length: float,
) -> AxisSegment:
    """Axis segment of a link's parent joint, centered at the centroid's foot on the axis line."""
    joint = tree.parent_joint(link)
    if joint is None or not joint.kind.movable:
        raise NotMovableError(f"Link '{link}' is not attached through a movable joint")
    frame = joint_frame_world(fk, joint)
    direction = _unit(frame[:3, :3] @ joint.axis_local)
    centroid = np.asarray(centroid_world, dtype=float)
    if joint.kind is JointKind.PRISMATIC:
        foot = centroid
    else:
        origin = frame[:3, 3]
        foot = origin + direction * ((centroid - origin) @ direction)
    half_length = max(float(half_length), DEGENERATE_HALF_EXTENT)
    return AxisSegment(foot - direction * half_length, foot + direction * half_length, label_kind(joint.kind))


def _perpendicular_basis(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.eye(3)[np.argmin(np.abs(z))]
    u = _unit(helper - (helper @ z) * z)
    return u, np.cross(z, u)


def compute_box(points_world, axis: AxisSegment) -> OrientedBox3D:
    """Box with z along the axis and x along the long edge of the projected min-area rectangle."""
    points = np.asarray(points_world, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise DomainError("Cannot fit a box to an empty point set")
    z = axis.direction
    u, w = _perpendicular_basis(z)
    center = points.mean(axis=0)
    offsets = points - center
    rect = min_area_rect(np.column_stack([offsets @ u, offsets @ w]))
    x = np.cos(rect.angle) * u + np.sin(rect.angle) * w
    y = np.cross(z, x)
    axes = np.vstack([x, y, z])
    half_extents = np.maximum(np.abs(offsets @ axes.T).max(axis=0), DEGENERATE_HALF_EXTENT)
    return OrientedBox3D(center, axes, half_extents)


def scene_triangles(tree: KinematicTree, fk: Mapping[str, np.ndarray]) -> np.ndarray:
    """All link triangles in world coordinates, shape (T, 3, 3)."""
    triangles = []
    for link in tree.links:
        mesh = link_mesh(tree, link.name)
        if mesh is None:
            continue
        vertices = apply_transform(fk[link.name], mesh.vertices)
        triangles.append(vertices[mesh.faces])
    if not triangles:
        return np.zeros((0, 3, 3))
    return np.concatenate(triangles)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Front-most triangle per bin plus the camera-frame plane of every triangle."""

    depth: np.ndarray  # (res, res), inf where empty
    owner: np.ndarray  # (res, res) triangle index, -1 where empty
    normals: np.ndarray  # (T, 3) unit plane normals
    offsets: np.ndarray  # (T,) plane offsets, n . x = offset

    @property
    def resolution(self) -> int:
        return self.depth.shape[0]


def depth_buffer(
    intr: CameraIntrinsics, pose: CameraPose, triangles_world, resolution: int = ZBUFFER_RES
) -> DepthMap:
    """Rasterize triangles at bin centers, keeping the nearest one per bin."""
    depth = np.full((resolution, resolution), np.inf)
    owner = np.full((resolution, resolution), -1, dtype=np.int64)
    triangles = np.asarray(triangles_world, dtype=float).reshape(-1, 3, 3)
    cam = pose.world_to_camera(triangles.reshape(-1, 3)).reshape(-1, 3, 3)
    # triangles crossing the camera plane are skipped
    cam = cam[np.all(cam[:, :, 2] > Z_EPS, axis=1)]
    normals = np.cross(cam[:, 1] - cam[:, 0], cam[:, 2] - cam[:, 0])
    lengths = np.linalg.norm(normals, axis=1)
    cam, normals = cam[lengths > 1e-15], normals[lengths > 1e-15]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = np.einsum("ij,ij->i", normals, cam[:, 0])
    if len(cam) == 0:
        return DepthMap(depth, owner, normals, offsets)

    inv_z = 1.0 / cam[:, :, 2]
    xs = (intr.fx * cam[:, :, 0] * inv_z + intr.cx) * resolution / intr.width
    ys = (intr.fy * cam[:, :, 1] * inv_z + intr.cy) * resolution / intr.height
    for index, (x, y, iz) in enumerate(zip(xs, ys, inv_z)):
        x_lo = max(int(np.ceil(x.min() - 0.5)), 0)
        x_hi = min(int(np.floor(x.max() - 0.5)), resolution - 1)
        y_lo = max(int(np.ceil(y.min() - 0.5)), 0)
        y_hi = min(int(np.floor(y.max() - 0.5)), resolution - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        area = (x[1] - x[0]) * (y[2] - y[0]) - (y[1] - y[0]) * (x[2] - x[0])
        if abs(area) < 1e-12:
            continue
        gx, gy = np.meshgrid(np.arange(x_lo, x_hi + 1) + 0.5, np.arange(y_lo, y_hi + 1) + 0.5)
        w0 = ((x[2] - x[1]) * (gy - y[1]) - (y[2] - y[1]) * (gx - x[1])) / area
        w1 = ((x[0] - x[2]) * (gy - y[2]) - (y[0] - y[2]) * (gx - x[2])) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= -1e-9) & (w1 >= -1e-9) & (w2 >= -1e-9)
        if not inside.any():
            continue
        # 1/z is linear in screen space
        values = np.full(inside.shape, np.inf)
        values[inside] = 1.0 / (w0 * iz[0] + w1 * iz[1] + w2 * iz[2])[inside].clip(min=1e-12)
        region = depth[y_lo : y_hi + 1, x_lo : x_hi + 1]
        closer = values < region
        region[closer] = values[closer]
        owner[y_lo : y_hi + 1, x_lo : x_hi + 1][closer] = index
    return DepthMap(depth, owner, normals, offsets)


def visibility_mask(
    intr: CameraIntrinsics, pose: CameraPose, points_world, buffer: DepthMap
) -> np.ndarray:
    """Points inside the image that the front-most triangle of their bin does not hide.

    Each point is tested against the plane of that triangle along the point's own ray,
    so a point never occludes itself at grazing angles.
    """
    resolution = buffer.resolution
    cam = pose.world_to_camera(points_world)
    depth = cam[:, 2]
    visible = depth > Z_EPS
    safe = np.where(visible, depth, 1.0)
    u = intr.fx * cam[:, 0] / safe + intr.cx
    v = intr.fy * cam[:, 1] / safe + intr.cy
    visible &= (u >= 0) & (u <= intr.width) & (v >= 0) & (v <= intr.height)
    bx = np.clip((u * resolution / intr.width).astype(int), 0, resolution - 1)
    by = np.clip((v * resolution / intr.height).astype(int), 0, resolution - 1)

    owner = buffer.owner[by, bx]
    covered = np.flatnonzero(visible & (owner >= 0))
    if len(covered) == 0:
        return visible
    points = cam[covered]
    normals = buffer.normals[owner[covered]]
    denominator = np.einsum("ij,ij->i", normals, points)
    with np.errstate(divide="ignore", invalid="ignore"):
        # ray parameter where the owner plane crosses the line of sight (1 = the point)
        s = buffer.offsets[owner[covered]] / denominator
    slack = (ZBUFFER_DEPTH_TOL + ZBUFFER_REL_TOL * points[:, 2]) / points[:, 2]
    hidden = np.isfinite(s) & (s > 0) & (s < 1.0 - slack)
    visible[covered[hidden]] = False
    return visible


def _world_clouds(
    samples: Mapping[str, SurfacePoints], fk: Mapping[str, np.ndarray]
) -> dict[str, np.ndarray]:
    return {link: points.in_world(fk[link]) for link, points in samples.items()}


def visible_points(
    tree: KinematicTree,
    fk: Mapping[str, np.ndarray],
    intr: CameraIntrinsics,
    pose: CameraPose,
    samples: Mapping[str, SurfacePoints],
    buffer: DepthMap | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample points that survive the occlusion test, with the link name of each point."""
    clouds = _world_clouds(samples, fk)
    if not clouds:
        return np.zeros((0, 3)), np.zeros(0, dtype=object)
    if buffer is None:
        buffer = depth_buffer(intr, pose, scene_triangles(tree, fk))
    points = np.vstack(list(clouds.values()))
    links = np.concatenate([np.full(len(c), name, dtype=object) for name, c in clouds.items()])
    mask = visibility_mask(intr, pose, points, buffer)
    return points[mask], links[mask]


def visible_movable_links(
    tree: KinematicTree,
    fk: Mapping[str, np.ndarray],
    intr: CameraIntrinsics,
    pose: CameraPose,
    samples: Mapping[str, SurfacePoints],
    v_min: float = VISIBILITY_MIN,
    buffer: DepthMap | None = None,
) -> list[tuple[str, float]]:
    """Movable links whose visible sample fraction is at least `v_min`, in tree order."""
    movable = [link for link in tree.movable_links() if link in samples]
    if not movable:
        return []
    if buffer is None:
        buffer = depth_buffer(intr, pose, scene_triangles(tree, fk))
    out = []
    for link in movable:
        mask = visibility_mask(intr, pose, samples[link].in_world(fk[link]), buffer)
        fraction = float(mask.mean())
        if fraction >= v_min:
            out.append((link, fraction))
    return out


def _normalize_camera_points(
    intr: CameraIntrinsics, depth_range: DepthRange, cam_points: np.ndarray
) -> np.ndarray:
    depth = np.maximum(cam_points[:, 2], Z_EPS)
    uv = np.column_stack(
        [intr.fx * cam_points[:, 0] / depth + intr.cx, intr.fy * cam_points[:, 1] / depth + intr.cy]
    )
    return normalize_points(intr, depth_range, uv, depth)


def annotate_scene(
    tree: KinematicTree,
    config: JointConfig,
    intr: CameraIntrinsics,
    pose: CameraPose,
    label_db: LabelDB | None = None,
    samples: Mapping[str, SurfacePoints] | None = None,
    sample_count: int = DEFAULT_SAMPLE_COUNT,
    seed: int = 0,
    base_pose: np.ndarray | None = None,
    v_min: float = VISIBILITY_MIN,
) -> ViewAnnotation:
    """Annotate one view: a triad per visible movable link plus the supporting geometry.

    Boxes are fitted in the camera frame and mapped back to world, so a rigid
    transform shared by object and camera leaves the normalized triads unchanged.
    """
    label_db = label_db or LabelDB()
    fk = forward_kinematics(tree, config, base_pose)
    if samples is None:
        samples = sample_object_points(tree, sample_count, seed)
    clouds = _world_clouds(samples, fk)
    if not clouds:
        raise GeometryError(f"Object '{tree.name}' has no link geometry")
    depth_range = depth_range_from(pose, np.vstack(list(clouds.values())))
    buffer = depth_buffer(intr, pose, scene_triangles(tree, fk))
    cloud, cloud_links = visible_points(tree, fk, intr, pose, samples, buffer)

    triads, boxes, axes = [], {}, {}
    to_camera = pose.matrix
    to_world = pose.inverse()
    for link, visibility in visible_movable_links(
        tree, fk, intr, pose, samples, v_min, buffer
    ):
        joint = tree.parent_joint(link)
        points = clouds[link]
        centroid = points.mean(axis=0)
        direction = _unit(joint_frame_world(fk, joint)[:3, :3] @ joint.axis_local)
        trial_axis = AxisSegment(centroid, centroid + direction, label_kind(joint.kind))
        box_cam = compute_box(pose.world_to_camera(points), trial_axis.transformed(to_camera))
        # the axis spans the largest box half-extent on each side of its foot
        axis = compute_axis(tree, fk, link, centroid, float(box_cam.half_extents.max()))
        axis_cam = axis.transformed(to_camera)
        boxes[link] = box_cam.transformed(to_world)
        axes[link] = axis

        q = config[joint.name]
        kind = label_kind(joint.kind)
        label = SemanticLabel(
            joint_kind=kind,
            link_name=label_db.semantic_name(link),
            actions=tuple(label_db.actions(link, kind, joint_state(joint, q))),
        )
        triads.append(
            Triad(
                box_norm=_normalize_camera_points(intr, depth_range, box_cam.vertices),
                axis_norm=_normalize_camera_points(
                    intr, depth_range, np.vstack([axis_cam.p0, axis_cam.p1])
                ),
                label=label,
                link=link,
                visibility=visibility,
            )
        )

    logger.debug("View annotated", object_id=tree.name, triads=len(triads))
    return ViewAnnotation(
        triads=tuple(triads),
        boxes=boxes,
        axes=axes,
        depth_range=depth_range,
        intrinsics=intr,
        pose=pose,
        visible_cloud=cloud,
        visible_links=cloud_links,
    )


def annotate_view(
    tree: KinematicTree,
    config: JointConfig,
    intr: CameraIntrinsics,
    pose: CameraPose,
    label_db: LabelDB | None = None,
    **kwargs,
) -> list[Triad]:
    return list(annotate_scene(tree, config, intr, pose, label_db, **kwargs).triads)
