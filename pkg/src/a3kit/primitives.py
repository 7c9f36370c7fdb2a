"""Rotate, Slide and Scroll action primitives: contact selection and end-effector trajectories."""

import json
import math
import re
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation

from .annotation import AxisSegment, OrientedBox3D, SemanticLabel
from .config import ARC_DEG, CONTACT_SHRINK, N_WAYPOINTS, SCROLL_LEXICON, SLIDE_M
from .errors import ContactError, DegenerateTrajectoryError, GeometryError
from .urdf_model import JointKind, JointSpec, frozen_array, joint_range

MIN_RADIUS = 1e-6


class PrimitiveKind(StrEnum):
    ROTATE = "Rotate"
    SLIDE = "Slide"
    SCROLL = "Scroll"


class Direction(StrEnum):
    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.FORWARD else -1.0


class PrimitiveParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    arc_deg: float = Field(default=ARC_DEG, gt=0)
    slide_m: float = Field(default=SLIDE_M, gt=0)
    n_waypoints: int = Field(default=N_WAYPOINTS, ge=2)


@dataclass(frozen=True, eq=False)
class GraspPose:
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion (x, y, z, w)
    score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", frozen_array(self.position))
        object.__setattr__(self, "orientation", frozen_array(self.orientation))
        if abs(np.linalg.norm(self.orientation) - 1.0) > 1e-9:
            raise GeometryError("Grasp orientation must be a unit quaternion")

    @classmethod
    def from_position(cls, position, approach=(0.0, 0.0, -1.0), score: float | None = None) -> "GraspPose":
        """Grasp whose gripper z-axis points along `approach`."""
        z = np.asarray(approach, dtype=float)
        z = z / np.linalg.norm(z)
        helper = np.eye(3)[np.argmin(np.abs(z))]
        x = helper - (helper @ z) * z
        x /= np.linalg.norm(x)
        matrix = np.column_stack([x, np.cross(z, x), z])
        return cls(position, Rotation.from_matrix(matrix).as_quat(), score)

    @property
    def rotation(self) -> np.ndarray:
        return Rotation.from_quat(self.orientation).as_matrix()


@dataclass(frozen=True, eq=False)
class Trajectory:
    waypoints: np.ndarray  # (N, 4, 4) world poses
    contact: np.ndarray
    kind: PrimitiveKind
    direction: Direction

    def __post_init__(self):
        object.__setattr__(self, "waypoints", frozen_array(self.waypoints))
        object.__setattr__(self, "contact", frozen_array(self.contact))
        if self.waypoints.ndim != 3 or len(self.waypoints) < 2:
            raise DegenerateTrajectoryError("A trajectory needs at least two waypoints")
        if np.linalg.norm(self.waypoints[0, :3, 3] - self.contact) > 1e-9:
            raise DegenerateTrajectoryError("The first waypoint must sit at the contact point")

    @property
    def positions(self) -> np.ndarray:
        return self.waypoints[:, :3, 3]

    @property
    def rotations(self) -> np.ndarray:
        return self.waypoints[:, :3, :3]

    def __len__(self) -> int:
        return len(self.waypoints)


def _scroll_pattern() -> re.Pattern:
    terms = sorted(SCROLL_LEXICON, key=len, reverse=True)
    return re.compile(r"\b(" + "|".join(re.escape(t) for t in terms) + r")\b")


SCROLL_RE = _scroll_pattern()


def select_primitive(label: SemanticLabel) -> PrimitiveKind:
    if label.joint_kind == "prismatic":
        return PrimitiveKind.SLIDE
    name = " ".join(label.link_name.lower().replace("_", " ").split())
    if SCROLL_RE.search(name):
        return PrimitiveKind.SCROLL
    return PrimitiveKind.ROTATE


def _contact_region(box: OrientedBox3D, points: np.ndarray, shrink: float) -> np.ndarray:
    """Mask of points inside the box shrunk on its two largest extents."""
    limits = box.half_extents * shrink
    smallest = int(np.argmin(box.half_extents))
    limits[smallest] = box.half_extents[smallest]
    return np.all(np.abs(box.local(points)) <= limits + 1e-9, axis=1)


def _candidate_indices(
    box: OrientedBox3D, points: np.ndarray, kind: PrimitiveKind, shrink: float
) -> np.ndarray:
    inside = box.contains(points, inflate=1e-9)
    if kind is PrimitiveKind.SCROLL:
        return np.flatnonzero(inside)
    mask = _contact_region(box, points, shrink) & inside
    return np.flatnonzero(mask if mask.any() else inside)


def choose_contact(
    box: OrientedBox3D,
    surface_world,
    kind: PrimitiveKind,
    axis: AxisSegment,
    seed: int,
    shrink: float = CONTACT_SHRINK,
) -> np.ndarray:
    """Contact point C: seeded pick inside the box, or the point nearest the axis for Scroll."""
    points = np.asarray(surface_world, dtype=float).reshape(-1, 3)
    indices = _candidate_indices(box, points, kind, shrink)
    if len(indices) == 0:
        raise ContactError("No surface point lies inside the bounding box")
    if kind is PrimitiveKind.SCROLL:
        return points[indices[int(np.argmin(axis.distance_to_line(points[indices])))]].copy()
    rng = np.random.default_rng(seed)
    return points[indices[int(rng.integers(len(indices)))]].copy()


def choose_grasp(
    box: OrientedBox3D,
    candidates: list[GraspPose],
    kind: PrimitiveKind,
    axis: AxisSegment,
    seed: int,
) -> GraspPose:
    """choose_contact over caller-supplied grasp candidates."""
    positions = np.array([g.position for g in candidates]).reshape(-1, 3)
    contact = choose_contact(box, positions, kind, axis, seed)
    index = int(np.flatnonzero(np.all(positions == contact, axis=1))[0])
    return candidates[index]


def plan_trajectory(
    kind: PrimitiveKind,
    contact,
    axis: AxisSegment,
    params: PrimitiveParams | None = None,
    direction: Direction = Direction.FORWARD,
    orientation=None,
) -> Trajectory:
    """Waypoints realizing one primitive; backward mirrors forward about the start pose.

    `orientation` is the initial 3x3 end-effector rotation (identity by default).
    """
    params = params or PrimitiveParams()
    contact = np.asarray(contact, dtype=float)
    start = np.eye(3) if orientation is None else np.asarray(orientation, dtype=float)
    axis_dir = axis.direction
    steps = np.linspace(0.0, 1.0, params.n_waypoints)
    sign = Direction(direction).sign

    waypoints = np.tile(np.eye(4), (params.n_waypoints, 1, 1))
    if kind is PrimitiveKind.SLIDE:
        waypoints[:, :3, :3] = start
        waypoints[:, :3, 3] = contact + np.outer(steps * sign * params.slide_m, axis_dir)
    else:
        angles = steps * sign * math.radians(params.arc_deg)
        turns = Rotation.from_rotvec(np.outer(angles, axis_dir)).as_matrix()
        waypoints[:, :3, :3] = turns @ start
        if kind is PrimitiveKind.ROTATE:
            foot = axis.p0 + axis_dir * ((contact - axis.p0) @ axis_dir)
            if np.linalg.norm(contact - foot) < MIN_RADIUS:
                raise DegenerateTrajectoryError(
                    "Contact lies on the rotation axis; use the Scroll primitive"
                )
            waypoints[:, :3, 3] = foot + turns @ (contact - foot)
        else:
            waypoints[:, :3, 3] = contact
    waypoints[0, :3, 3] = contact
    return Trajectory(waypoints, contact, PrimitiveKind(kind), Direction(direction))


def default_params(
    joint: JointSpec,
    q: float,
    base: PrimitiveParams | None = None,
    direction: Direction = Direction.FORWARD,
) -> PrimitiveParams:
    """Slide distance capped at half the travel a prismatic joint has left in `direction`."""
    base = base or PrimitiveParams()
    if joint.kind is not JointKind.PRISMATIC:
        return base
    lower, upper = joint_range(joint)
    remaining = upper - q if Direction(direction) is Direction.FORWARD else q - lower
    if remaining <= 0:
        return base
    return base.model_copy(update={"slide_m": min(base.slide_m, remaining / 2.0)})


def trajectory_to_record(trajectory: Trajectory) -> dict:
    return {
        "kind": trajectory.kind.value,
        "direction": trajectory.direction.value,
        "contact": [float(v) for v in trajectory.contact],
        "waypoints": [[float(v) for v in pose.reshape(-1)] for pose in trajectory.waypoints],
    }


def trajectories_to_json(trajectories: list[Trajectory], **metadata) -> str:
    """JSON document of 4x4 row-major waypoint poses plus caller metadata."""
    return json.dumps(
        {**metadata, "trajectories": [trajectory_to_record(t) for t in trajectories]}, indent=2
    )
