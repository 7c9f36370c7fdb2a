"""URDF parsing, forward kinematics and link surface sampling for articulated objects."""

import functools
import xml.etree.ElementTree as ET
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from types import MappingProxyType

import numpy as np
import trimesh
from scipy.spatial.transform import Rotation

from .config import CONTINUOUS_RANGE, CYLINDER_SECTIONS, DEFAULT_SAMPLE_COUNT
from .errors import (
    DomainError,
    GeometryError,
    JointConfigError,
    StructureError,
    UrdfParseError,
    UrdfValidationError,
)
from .logging_config import configure_logging
from .seeding import derive_seed

# Logging Configuration
logger = configure_logging()

AXIS_TOL = 1e-9
LIMIT_TOL = 1e-12
IGNORED_TAGS = {"material"}
WARNED_TAGS = {"transmission", "gazebo"}


class JointKind(StrEnum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    CONTINUOUS = "continuous"
    FIXED = "fixed"

    @property
    def movable(self) -> bool:
        return self is not JointKind.FIXED

    @property
    def rotational(self) -> bool:
        return self in (JointKind.REVOLUTE, JointKind.CONTINUOUS)


def frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def make_transform(rotation=None, translation=None) -> np.ndarray:
    transform = np.eye(4)
    if rotation is not None:
        transform[:3, :3] = rotation
    if translation is not None:
        transform[:3, 3] = translation
    return transform


def invert_transform(transform: np.ndarray) -> np.ndarray:
    rotation = transform[:3, :3]
    inverse = np.eye(4)
    inverse[:3, :3] = rotation.T
    inverse[:3, 3] = -rotation.T @ transform[:3, 3]
    return inverse


def apply_transform(transform: np.ndarray, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return pts @ transform[:3, :3].T + transform[:3, 3]


def rpy_matrix(rpy) -> np.ndarray:
    """URDF roll-pitch-yaw (fixed axes x, y, z) to a rotation matrix."""
    return Rotation.from_euler("xyz", rpy).as_matrix()


@dataclass(frozen=True, eq=False)
class JointSpec:
    name: str
    kind: JointKind
    axis_local: np.ndarray
    origin: np.ndarray
    limits: tuple[float, float] | None
    parent_link: str
    child_link: str

    def __post_init__(self):
        object.__setattr__(self, "kind", JointKind(self.kind))
        object.__setattr__(self, "axis_local", frozen_array(self.axis_local))
        object.__setattr__(self, "origin", frozen_array(self.origin))
        if self.kind.movable and abs(np.linalg.norm(self.axis_local) - 1.0) > AXIS_TOL:
            raise UrdfValidationError(f"Joint '{self.name}' axis is not a unit vector")
        if self.kind in (JointKind.REVOLUTE, JointKind.PRISMATIC) and self.limits is None:
            raise UrdfValidationError(f"Joint '{self.name}' ({self.kind}) requires limits")
        if self.kind is JointKind.CONTINUOUS and self.limits is not None:
            raise UrdfValidationError(f"Continuous joint '{self.name}' cannot carry limits")
        if self.limits is not None:
            lower, upper = (float(v) for v in self.limits)
            if lower > upper:
                raise UrdfValidationError(
                    f"Joint '{self.name}' has lower limit {lower} > upper limit {upper}"
                )
            object.__setattr__(self, "limits", (lower, upper))


@dataclass(frozen=True, eq=False)
class MeshRef:
    """One piece of link geometry: a mesh file, or inline triangles for tessellated primitives."""

    path: Path | None
    scale: tuple[float, float, float]
    transform: np.ndarray
    vertices: np.ndarray | None = None
    faces: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "transform", frozen_array(self.transform))
        if self.vertices is not None:
            object.__setattr__(self, "vertices", frozen_array(self.vertices))
            object.__setattr__(self, "faces", frozen_array(self.faces, dtype=np.int64))


@dataclass(frozen=True)
class LinkSpec:
    name: str
    mesh_refs: tuple[MeshRef, ...] = ()


@dataclass(frozen=True, eq=False)
class KinematicTree:
    links: tuple[LinkSpec, ...]
    joints: tuple[JointSpec, ...]
    root: str
    name: str = ""
    warnings: tuple[str, ...] = ()
    base_dir: Path | None = None
    _links: dict = field(init=False, repr=False)
    _joints: dict = field(init=False, repr=False)
    _parent: dict = field(init=False, repr=False)
    _children: dict = field(init=False, repr=False)
    _order: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "warnings", tuple(self.warnings))

        links = {}
        for link in self.links:
            if link.name in links:
                raise StructureError(f"Duplicate link name: '{link.name}'")
            links[link.name] = link
        joints, parent, children = {}, {}, {name: [] for name in links}
        for joint in self.joints:
            if joint.name in joints:
                raise StructureError(f"Duplicate joint name: '{joint.name}'")
            for end in (joint.parent_link, joint.child_link):
                if end not in links:
                    raise StructureError(f"Joint '{joint.name}' references undefined link '{end}'")
            if joint.child_link in parent:
                raise StructureError(f"Link '{joint.child_link}' has more than one parent joint")
            joints[joint.name] = joint
            parent[joint.child_link] = joint
            children[joint.parent_link].append(joint)
        if self.root not in links:
            raise StructureError(f"Root link '{self.root}' is not defined")
        if self.root in parent:
            raise StructureError(f"Root link '{self.root}' has a parent joint")

        # Breadth-first order from the root; unreachable links mean a cycle
        order, seen, queue = [], {self.root}, deque([self.root])
        while queue:
            current = queue.popleft()
            for joint in children[current]:
                if joint.child_link in seen:
                    raise StructureError(f"Cycle through joint '{joint.name}'")
                seen.add(joint.child_link)
                order.append(joint)
                queue.append(joint.child_link)
        if len(seen) != len(links):
            missing = sorted(set(links) - seen)
            raise StructureError(f"Links not reachable from root (cycle?): {missing}")

        object.__setattr__(self, "_links", links)
        object.__setattr__(self, "_joints", joints)
        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_children", {k: tuple(v) for k, v in children.items()})
        object.__setattr__(self, "_order", tuple(order))

    @property
    def link_names(self) -> tuple[str, ...]:
        return tuple(link.name for link in self.links)

    @property
    def ordered_joints(self) -> tuple[JointSpec, ...]:
        """Joints with every parent joint listed before its children."""
        return self._order

    def link(self, name: str) -> LinkSpec:
        try:
            return self._links[name]
        except KeyError:
            raise StructureError(f"Unknown link '{name}'") from None

    def joint(self, name: str) -> JointSpec:
        try:
            return self._joints[name]
        except KeyError:
            raise StructureError(f"Unknown joint '{name}'") from None

    def parent_joint(self, link: str) -> JointSpec | None:
        self.link(link)
        return self._parent.get(link)

    def children(self, link: str) -> tuple[JointSpec, ...]:
        return self._children[self.link(link).name]

    def movable_links(self) -> list[str]:
        """Links whose parent joint can move (nonzero travel)."""
        out = []
        for link in self.links:
            joint = self._parent.get(link.name)
            if joint is None or not joint.kind.movable:
                continue
            lower, upper = joint_range(joint)
            if upper > lower:
                out.append(link.name)
        return out


@dataclass(frozen=True)
class JointConfig:
    values: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(
            self, "values", MappingProxyType({k: float(v) for k, v in dict(self.values).items()})
        )

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def __reduce__(self):
        return (JointConfig, (dict(self.values),))

    def with_value(self, name: str, value: float) -> "JointConfig":
        values = dict(self.values)
        values[name] = value
        return JointConfig(values)

    def validate(self, tree: KinematicTree) -> "JointConfig":
        for joint in tree.joints:
            if not joint.kind.movable:
                continue
            if joint.name not in self.values:
                raise JointConfigError(f"Missing value for joint '{joint.name}'")
            if joint.limits is not None:
                lower, upper = joint.limits
                value = self.values[joint.name]
                if value < lower - LIMIT_TOL or value > upper + LIMIT_TOL:
                    raise JointConfigError(
                        f"Joint '{joint.name}' value {value} outside [{lower}, {upper}]"
                    )
        return self


@dataclass(frozen=True, eq=False)
class SurfacePoints:
    link: str
    points_local: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "points_local", frozen_array(self.points_local))

    def __len__(self) -> int:
        return len(self.points_local)

    def in_world(self, link_pose: np.ndarray) -> np.ndarray:
        return apply_transform(link_pose, self.points_local)


def _floats(text: str | None, count: int, default: tuple[float, ...], what: str) -> tuple:
    if text is None:
        return default
    try:
        values = tuple(float(v) for v in text.split())
    except ValueError:
        raise UrdfValidationError(f"Non-numeric {what}: '{text}'") from None
    if len(values) != count:
        raise UrdfValidationError(f"Expected {count} values for {what}, got '{text}'")
    return values


def _origin(element: ET.Element | None) -> np.ndarray:
    if element is None:
        return np.eye(4)
    xyz = _floats(element.get("xyz"), 3, (0.0, 0.0, 0.0), "origin xyz")
    rpy = _floats(element.get("rpy"), 3, (0.0, 0.0, 0.0), "origin rpy")
    return make_transform(rpy_matrix(rpy), xyz)


def _resolve_mesh_path(filename: str, base_dir: Path | None) -> Path:
    if filename.startswith("package://"):
        filename = filename[len("package://") :].split("/", 1)[-1]
    elif filename.startswith("file://"):
        filename = filename[len("file://") :]
    path = Path(filename)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return path


def _parse_geometry(
    link_name: str, holder: ET.Element, base_dir: Path | None, warnings: list[str]
) -> MeshRef | None:
    transform = _origin(holder.find("origin"))
    geometry = holder.find("geometry")
    if geometry is None or len(geometry) == 0:
        warnings.append(f"Link '{link_name}' has a {holder.tag} without geometry")
        return None
    shape = geometry[0]
    if shape.tag == "mesh":
        filename = shape.get("filename")
        if not filename:
            raise UrdfValidationError(f"Link '{link_name}' mesh is missing a filename")
        scale = _floats(shape.get("scale"), 3, (1.0, 1.0, 1.0), "mesh scale")
        return MeshRef(_resolve_mesh_path(filename, base_dir), scale, transform)
    if shape.tag == "box":
        size = _floats(shape.get("size"), 3, None, "box size")
        if size is None:
            raise UrdfValidationError(f"Link '{link_name}' box is missing a size")
        mesh = trimesh.creation.box(extents=size)
        return MeshRef(None, (1.0, 1.0, 1.0), transform, mesh.vertices, mesh.faces)
    if shape.tag == "cylinder":
        radius = _floats(shape.get("radius"), 1, None, "cylinder radius")
        length = _floats(shape.get("length"), 1, None, "cylinder length")
        if radius is None or length is None:
            raise UrdfValidationError(f"Link '{link_name}' cylinder needs radius and length")
        mesh = trimesh.creation.cylinder(
            radius=radius[0], height=length[0], sections=CYLINDER_SECTIONS
        )
        return MeshRef(None, (1.0, 1.0, 1.0), transform, mesh.vertices, mesh.faces)
    warnings.append(f"Link '{link_name}' uses unsupported geometry <{shape.tag}>; ignored")
    return None


def _parse_link(element: ET.Element, base_dir: Path | None, warnings: list[str]) -> LinkSpec:
    name = element.get("name")
    if not name:
        raise UrdfValidationError("Link element missing 'name' attribute")
    holders = element.findall("visual") or element.findall("collision")
    refs = []
    for holder in holders:
        ref = _parse_geometry(name, holder, base_dir, warnings)
        if ref is not None:
            refs.append(ref)
    return LinkSpec(name, tuple(refs))


def _parse_joint(element: ET.Element, warnings: list[str]) -> JointSpec:
    name = element.get("name")
    if not name:
        raise UrdfValidationError("Joint element missing 'name' attribute")
    kind_text = element.get("type")
    try:
        kind = JointKind(kind_text)
    except ValueError:
        raise UrdfValidationError(f"Joint '{name}' has unsupported type '{kind_text}'") from None
    parent = element.find("parent")
    child = element.find("child")
    if parent is None or not parent.get("link") or child is None or not child.get("link"):
        raise UrdfValidationError(f"Joint '{name}' needs <parent link> and <child link>")

    axis_element = element.find("axis")
    axis = np.array(
        _floats(
            None if axis_element is None else axis_element.get("xyz"),
            3,
            (1.0, 0.0, 0.0),
            "axis xyz",
        )
    )
    norm = np.linalg.norm(axis)
    if kind.movable:
        if norm < AXIS_TOL:
            raise UrdfValidationError(f"Joint '{name}' has a zero axis")
        axis = axis / norm

    limits = None
    limit = element.find("limit")
    if kind in (JointKind.REVOLUTE, JointKind.PRISMATIC):
        if limit is None:
            raise UrdfValidationError(f"Joint '{name}' ({kind}) is missing <limit>")
        lower = _floats(limit.get("lower"), 1, (0.0,), "limit lower")[0]
        upper = _floats(limit.get("upper"), 1, (0.0,), "limit upper")[0]
        limits = (lower, upper)
    if element.find("mimic") is not None:
        warnings.append(f"Joint '{name}' <mimic> is not supported; joint treated as independent")

    return JointSpec(
        name=name,
        kind=kind,
        axis_local=axis,
        origin=_origin(element.find("origin")),
        limits=limits,
        parent_link=parent.get("link"),
        child_link=child.get("link"),
    )


def parse_urdf(document_text: str, base_dir: str | Path | None = None) -> KinematicTree:
    """Parse a URDF document into a validated kinematic tree.

    Args:
        document_text: URDF XML text.
        base_dir: Directory relative mesh paths are resolved against.

    Returns:
        A KinematicTree; unsupported elements are listed in `warnings`.
    """
    base_dir = Path(base_dir) if base_dir is not None else None
    try:
        robot = ET.fromstring(document_text)
    except ET.ParseError as e:
        line, column = e.position
        raise UrdfParseError(f"Malformed URDF XML: {e}", line, column) from e
    if robot.tag != "robot":
        raise UrdfValidationError(f"Root element must be 'robot', found '{robot.tag}'")

    warnings: list[str] = []
    links, joints = [], []
    for element in robot:
        if element.tag == "link":
            links.append(_parse_link(element, base_dir, warnings))
        elif element.tag == "joint":
            joints.append(_parse_joint(element, warnings))
        elif element.tag in WARNED_TAGS:
            warnings.append(f"<{element.tag}> is not supported; ignored")
        elif element.tag not in IGNORED_TAGS:
            warnings.append(f"Unknown element <{element.tag}>; ignored")

    if not links:
        raise StructureError("URDF defines no links")
    children = {joint.child_link for joint in joints}
    roots = [link.name for link in links if link.name not in children]
    if len(roots) != 1:
        raise StructureError(f"Expected exactly one root link, found {roots or 'none (cycle)'}")

    tree = KinematicTree(
        links=tuple(links),
        joints=tuple(joints),
        root=roots[0],
        name=robot.get("name", ""),
        warnings=tuple(warnings),
        base_dir=base_dir,
    )
    for warning in warnings:
        logger.warning("URDF element ignored", robot=tree.name, detail=warning)
    return tree


def load_urdf(path: str | Path) -> KinematicTree:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UrdfParseError(f"Cannot read URDF '{path}': {e}") from e
    return parse_urdf(text, base_dir=path.parent)


def load_semantics(path: str | Path) -> dict[str, str]:
    """Read a PartNet-Mobility semantics.txt (`<link> <joint type> <semantic name>`)."""
    semantics = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split(maxsplit=2)
        if len(parts) == 3:
            semantics[parts[0]] = parts[2].strip()
    return semantics


def joint_range(joint: JointSpec) -> tuple[float, float]:
    """Effective joint range; continuous joints use (-pi, pi), fixed joints (0, 0)."""
    if joint.kind is JointKind.CONTINUOUS:
        return CONTINUOUS_RANGE
    if joint.limits is None:
        return (0.0, 0.0)
    return joint.limits


def joint_motion(joint: JointSpec, value: float) -> np.ndarray:
    if joint.kind.rotational:
        return make_transform(rotation=Rotation.from_rotvec(joint.axis_local * value).as_matrix())
    if joint.kind is JointKind.PRISMATIC:
        return make_transform(translation=joint.axis_local * value)
    return np.eye(4)


def forward_kinematics(
    tree: KinematicTree, config: JointConfig, base_pose: np.ndarray | None = None
) -> dict[str, np.ndarray]:
    """World transform of every link; the root sits at `base_pose` (identity by default)."""
    poses = {tree.root: np.eye(4) if base_pose is None else np.asarray(base_pose, dtype=float)}
    for joint in tree.ordered_joints:
        value = 0.0
        if joint.kind.movable:
            if joint.name not in config.values:
                raise JointConfigError(f"Missing value for joint '{joint.name}'")
            value = config.values[joint.name]
        poses[joint.child_link] = poses[joint.parent_link] @ joint.origin @ joint_motion(
            joint, value
        )
    return poses


def joint_frame_world(fk: Mapping[str, np.ndarray], joint: JointSpec) -> np.ndarray:
    """World pose of the joint frame (parent link pose composed with the joint origin)."""
    return fk[joint.parent_link] @ joint.origin


def middle_joint_values(tree: KinematicTree) -> JointConfig:
    values = {}
    for joint in tree.joints:
        if not joint.kind.movable:
            continue
        if joint.kind is JointKind.CONTINUOUS:
            values[joint.name] = 0.0
        else:
            lower, upper = joint.limits
            values[joint.name] = (lower + upper) / 2.0
    return JointConfig(values)


def random_joint_values(tree: KinematicTree, rng: np.random.Generator) -> JointConfig:
    values = {}
    for joint in tree.joints:
        if joint.kind.movable:
            lower, upper = joint_range(joint)
            values[joint.name] = float(rng.uniform(lower, upper))
    return JointConfig(values)


@functools.lru_cache(maxsize=256)
def _read_mesh_file(path: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        mesh = trimesh.load(path, force="mesh", process=False)
    except (OSError, ValueError) as e:
        raise GeometryError(f"Cannot load mesh '{path}': {e}") from e
    return frozen_array(mesh.vertices), frozen_array(mesh.faces, dtype=np.int64)


def link_mesh(tree: KinematicTree, link: str) -> trimesh.Trimesh | None:
    """Union of a link's triangle meshes in the link frame (scale and origin applied)."""
    refs = tree.link(link).mesh_refs
    if not refs:
        return None
    all_vertices, all_faces, offset = [], [], 0
    for ref in refs:
        if ref.vertices is not None:
            vertices, faces = ref.vertices, ref.faces
        else:
            vertices, faces = _read_mesh_file(str(ref.path))
        vertices = apply_transform(ref.transform, np.asarray(vertices) * np.asarray(ref.scale))
        all_vertices.append(vertices)
        all_faces.append(np.asarray(faces).reshape(-1, 3) + offset)
        offset += len(vertices)
    return trimesh.Trimesh(np.vstack(all_vertices), np.vstack(all_faces), process=False)


def sample_link_points(
    tree: KinematicTree, link: str, count: int = DEFAULT_SAMPLE_COUNT, seed: int = 0
) -> SurfacePoints:
    """Area-weighted uniform samples over a link's mesh surfaces, in the link frame."""
    if count < 1:
        raise DomainError(f"Sample count must be positive, got {count}")
    mesh = link_mesh(tree, link)
    if mesh is None or len(mesh.faces) == 0:
        raise GeometryError(f"Link '{link}' has no triangle geometry")
    if mesh.area <= 0.0:
        raise GeometryError(f"Link '{link}' has zero surface area")
    points, _ = trimesh.sample.sample_surface(mesh, count, seed=seed)
    return SurfacePoints(link, points, seed)


def sample_object_points(
    tree: KinematicTree, count: int = DEFAULT_SAMPLE_COUNT, seed: int = 0
) -> dict[str, SurfacePoints]:
    """Surface samples for every link with geometry; per-link seeds derive from the link name."""
    return {
        link.name: sample_link_points(tree, link.name, count, derive_seed(seed, link.name))
        for link in tree.links
        if link.mesh_refs
    }
