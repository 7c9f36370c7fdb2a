"""Pinhole camera model, projection, depth normalization and minimum-area rectangles."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .config import FOCAL_PX, IMAGE_HEIGHT, IMAGE_WIDTH, MIN_DEPTH_SPAN, Z_EPS
from .errors import DegenerateRangeError, DomainError, GeometryError
from .urdf_model import frozen_array

ORTHO_TOL = 1e-9
RANK_TOL = 1e-10
TIE_TOL = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = IMAGE_WIDTH
    height: int = IMAGE_HEIGHT
    fx: float = FOCAL_PX
    fy: float = FOCAL_PX
    cx: float = IMAGE_WIDTH / 2
    cy: float = IMAGE_HEIGHT / 2

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DomainError(f"Image size must be positive, got {self.width}x{self.height}")
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError(f"Focal lengths must be positive, got fx={self.fx} fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, factor: float) -> "CameraIntrinsics":
        return CameraIntrinsics(
            width=round(self.width * factor),
            height=round(self.height * factor),
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
        )


@dataclass(frozen=True, eq=False)
class CameraPose:
    """World-to-camera rigid transform: p_cam = rotation @ p_world + translation.

    Camera frame is right-handed with +z into the scene, +x image right, +y image down.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = frozen_array(self.rotation)
        translation = frozen_array(self.translation)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise GeometryError("Camera pose needs a 3x3 rotation and a 3-vector translation")
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=ORTHO_TOL, rtol=0.0):
            raise GeometryError("Camera rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHO_TOL:
            raise GeometryError("Camera rotation is not a proper rotation (det != +1)")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def from_matrix(cls, matrix) -> "CameraPose":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[:3, :3], matrix[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @property
    def eye(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def world_to_camera(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return pts @ self.rotation.T + self.translation

    def camera_to_world(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return (pts - self.translation) @ self.rotation

    def inverse(self) -> np.ndarray:
        """Camera-to-world 4x4 transform."""
        out = np.eye(4)
        out[:3, :3] = self.rotation.T
        out[:3, 3] = self.eye
        return out

    def transformed(self, transform: np.ndarray) -> "CameraPose":
        """Pose of the same camera after a rigid `transform` is applied to the whole world."""
        transform = np.asarray(transform, dtype=float)
        rotation = self.rotation @ transform[:3, :3].T
        return CameraPose(rotation, self.translation - rotation @ transform[:3, 3])


@dataclass(frozen=True)
class DepthRange:
    z_min: float
    z_max: float

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise DegenerateRangeError(f"Depth range needs z_max > z_min, got ({self.z_min}, {self.z_max})")
        if self.z_min <= 0:
            raise DomainError(f"Depth range must lie in front of the camera, z_min={self.z_min}")

    @property
    def span(self) -> float:
        return self.z_max - self.z_min

    def normalize(self, depth):
        return np.clip((np.asarray(depth, dtype=float) - self.z_min) / self.span, 0.0, 1.0)


@dataclass(frozen=True)
class NormalizedPoint3:
    u: float
    v: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.u, self.v, self.z)


@dataclass(frozen=True, eq=False)
class Rect2D:
    center: np.ndarray
    half_extents: np.ndarray  # (long, short)
    angle: float  # long edge vs +x, in [0, pi)
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", frozen_array(self.center))
        object.__setattr__(self, "half_extents", frozen_array(self.half_extents))

    @property
    def area(self) -> float:
        return float(4.0 * self.half_extents[0] * self.half_extents[1])

    @property
    def axes(self) -> np.ndarray:
        """Rows: long-edge direction, short-edge direction."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, s], [-s, c]])

    def corners(self) -> np.ndarray:
        long_dir, short_dir = self.axes
        hl, hs = self.half_extents
        signs = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]])
        return self.center + signs[:, :1] * hl * long_dir + signs[:, 1:] * hs * short_dir

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        local = (np.asarray(points, dtype=float).reshape(-1, 2) - self.center) @ self.axes.T
        return np.all(np.abs(local) <= self.half_extents + tol, axis=1)


@dataclass(frozen=True, eq=False)
class ProjectedPoints:
    """Pixel coordinates and camera depth per point; behind-camera points carry NaN pixels."""

    uv: np.ndarray
    depth: np.ndarray
    behind: np.ndarray

    def __len__(self) -> int:
        return len(self.depth)

    def in_image(self, intr: CameraIntrinsics) -> np.ndarray:
        u, v = self.uv[:, 0], self.uv[:, 1]
        with np.errstate(invalid="ignore"):
            return (~self.behind) & (u >= 0) & (u <= intr.width) & (v >= 0) & (v <= intr.height)


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> CameraPose:
    eye = np.asarray(eye, dtype=float)
    forward = np.asarray(target, dtype=float) - eye
    distance = np.linalg.norm(forward)
    if distance < 1e-12:
        raise GeometryError("Camera eye and target coincide")
    forward /= distance
    right = np.cross(forward, np.asarray(up, dtype=float))
    norm = np.linalg.norm(right)
    if norm < 1e-9:
        raise GeometryError("Up vector is zero or parallel to the view direction")
    right /= norm
    down = np.cross(forward, right)
    rotation = np.vstack([right, down, forward])
    return CameraPose(rotation, -rotation @ eye)


def project_points(intr: CameraIntrinsics, pose: CameraPose, pts_world) -> ProjectedPoints:
    cam = pose.world_to_camera(pts_world)
    depth = cam[:, 2]
    behind = depth <= Z_EPS
    safe = np.where(behind, np.nan, depth)
    uv = np.column_stack([intr.fx * cam[:, 0] / safe + intr.cx, intr.fy * cam[:, 1] / safe + intr.cy])
    return ProjectedPoints(uv, depth, behind)


def depth_range_from(pose: CameraPose, points) -> DepthRange:
    """Scene depth range of all in-front points, padded to a minimum span."""
    depth = pose.world_to_camera(points)[:, 2]
    depth = depth[depth > Z_EPS]
    if depth.size == 0:
        raise DomainError("No scene point lies in front of the camera")
    z_min, z_max = float(depth.min()), float(depth.max())
    if z_max - z_min < MIN_DEPTH_SPAN:
        middle = (z_min + z_max) / 2.0
        z_min = max(middle - MIN_DEPTH_SPAN / 2.0, Z_EPS)
        z_max = z_min + MIN_DEPTH_SPAN
    return DepthRange(z_min, z_max)


def normalize_points(intr: CameraIntrinsics, depth_range: DepthRange, uv, depth) -> np.ndarray:
    """Vectorized normalize_point: rows of (u, v, z), each clamped to [0, 1]."""
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    u = np.clip(uv[:, 0] / intr.width, 0.0, 1.0)
    v = np.clip(uv[:, 1] / intr.height, 0.0, 1.0)
    return np.column_stack([u, v, depth_range.normalize(depth)])


def normalize_point(
    intr: CameraIntrinsics, depth_range: DepthRange, u_px: float, v_px: float, depth_m: float
) -> NormalizedPoint3:
    u, v, z = normalize_points(intr, depth_range, [[u_px, v_px]], [depth_m])[0]
    return NormalizedPoint3(float(u), float(v), float(z))


def denormalize_depth(depth_range: DepthRange, z_norm):
    z = np.asarray(z_norm, dtype=float)
    if np.any(~np.isfinite(z)) or np.any(z < 0.0) or np.any(z > 1.0):
        raise DomainError(f"Normalized depth must lie in [0, 1], got {z_norm}")
    depth = depth_range.z_min + z * depth_range.span
    return float(depth) if depth.ndim == 0 else depth


def unproject_normalized(
    intr: CameraIntrinsics, depth_range: DepthRange, pose: CameraPose, uvz
) -> np.ndarray:
    """World points from normalized (u, v, z) rows: denormalize, back-project, camera to world."""
    uvz = np.asarray(uvz, dtype=float).reshape(-1, 3)
    depth = denormalize_depth(depth_range, uvz[:, 2])
    x = (uvz[:, 0] * intr.width - intr.cx) / intr.fx * depth
    y = (uvz[:, 1] * intr.height - intr.cy) / intr.fy * depth
    return pose.camera_to_world(np.column_stack([x, y, depth]))


def _wrap_angle(angle: float) -> float:
    angle = math.fmod(angle, math.pi)
    if angle < 0:
        angle += math.pi
    if math.pi - angle < TIE_TOL:
        angle = 0.0
    return angle


def _direction_angle(direction) -> float:
    return _wrap_angle(math.atan2(direction[1], direction[0]))


def _degenerate_rect(points: np.ndarray, mean: np.ndarray, vt: np.ndarray | None) -> Rect2D:
    direction = np.array([1.0, 0.0]) if vt is None else vt[0]
    normal = np.array([-direction[1], direction[0]])
    centered = points - mean
    a, b = centered @ direction, centered @ normal
    center = mean + direction * (a.max() + a.min()) / 2 + normal * (b.max() + b.min()) / 2
    half_long, half_short = (a.max() - a.min()) / 2, (b.max() - b.min()) / 2
    return Rect2D(center, (half_long, half_short), _direction_angle(direction), degenerate=True)


def min_area_rect(pts_2d) -> Rect2D:
    """Minimum-area enclosing rectangle by rotating calipers over convex hull edges.

    Area ties resolve to the smallest long-edge angle in [0, pi). Rank-deficient
    sets yield a degenerate rectangle with a zero (or rounding-level) short side.
    """
    points = np.asarray(pts_2d, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        raise DomainError("min_area_rect needs at least one point")
    mean = points.mean(axis=0)
    if len(points) < 3:
        _, s, vt = np.linalg.svd(points - mean)
        return _degenerate_rect(points, mean, vt if s[0] > 0 else None)
    _, s, vt = np.linalg.svd(points - mean, full_matrices=False)
    if s[0] == 0.0:
        return _degenerate_rect(points, mean, None)
    if s[1] <= RANK_TOL * s[0]:
        return _degenerate_rect(points, mean, vt)

    try:
        hull = points[ConvexHull(points).vertices]
    except QhullError:
        return _degenerate_rect(points, mean, vt)

    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.linalg.norm(edges, axis=1)
    edges = edges[lengths > 0] / lengths[lengths > 0, None]

    best = None
    for edge in edges:
        normal = np.array([-edge[1], edge[0]])
        a, b = hull @ edge, hull @ normal
        width, height = a.max() - a.min(), b.max() - b.min()
        area = width * height
        center = edge * (a.max() + a.min()) / 2 + normal * (b.max() + b.min()) / 2
        if abs(width - height) <= TIE_TOL * max(width, height):
            angle = min(_direction_angle(edge), _direction_angle(normal))
            half = (max(width, height) / 2, min(width, height) / 2)
        elif width > height:
            angle, half = _direction_angle(edge), (width / 2, height / 2)
        else:
            angle, half = _direction_angle(normal), (height / 2, width / 2)
        candidate = (area, angle, center, half)
        if best is None:
            best = candidate
            continue
        scale = max(abs(best[0]), abs(area))
        if area < best[0] - TIE_TOL * scale or (
            abs(area - best[0]) <= TIE_TOL * scale and angle < best[1]
        ):
            best = candidate

    area, angle, center, half = best
    return Rect2D(center, half, angle)
