"""Quasi-static articulation simulator and the closed-loop benchmark harness built on it."""

import csv
import dataclasses
import math
from collections import defaultdict
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import StrEnum
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import trimesh
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation
from tqdm import tqdm

from .annotation import (
    AxisSegment,
    OrientedBox3D,
    SemanticLabel,
    Triad,
    ViewAnnotation,
    annotate_scene,
)
from .camera_geometry import CameraIntrinsics, CameraPose, unproject_normalized
from .config import (
    ATTACH_TOL,
    ATTEMPTS,
    CONTACT_MARGIN,
    DEFAULT_SAMPLE_COUNT,
    DETACH_EPS,
    EVAL_AZIMUTH_DEG,
    EVAL_ELEVATION_DEG,
    EVAL_RADIUS_FACTOR,
    IMAGE_DIR,
    ORIENTATION_WEIGHT,
    SIGMA,
)
from .corpus import CorpusObject
from .dataset_builder import PROMPTS, SubTask, camera_on_sphere, object_bounds
from .errors import (
    A3Error,
    AnswerParseError,
    ContactError,
    DegenerateTrajectoryError,
    DetachedError,
    DomainError,
    GeometryError,
    NotMovableError,
    TransportError,
)
from .logging_config import configure_logging
from .model_io import EpisodeContext, PredictionSource, parse_triad_answer, predict
from .primitives import (
    Direction,
    PrimitiveKind,
    PrimitiveParams,
    Trajectory,
    choose_contact,
    default_params,
    plan_trajectory,
    select_primitive,
)
from .seeding import derive_seed, rng_for
from .skills import LabelDB, default_semantic_name
from .urdf_model import (
    JointConfig,
    JointKind,
    JointSpec,
    KinematicTree,
    apply_transform,
    forward_kinematics,
    invert_transform,
    joint_frame_world,
    joint_motion,
    joint_range,
    link_mesh,
    middle_joint_values,
    sample_object_points,
)

# Logging Configuration
logger = configure_logging()

Predictor = PredictionSource | Callable[[EpisodeContext], str]


class Failure(StrEnum):
    NO_CONTACT = "no_contact"
    DETACHED = "detached"
    WRONG_DIRECTION = "wrong_direction"
    DEGENERATE = "degenerate"


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sigma: float = Field(default=SIGMA, gt=0)  # success needs d > sigma (native joint units)
    detach_eps: float = Field(default=DETACH_EPS, gt=0)
    attempts: int = Field(default=ATTEMPTS, ge=1)
    attach_tol: float = Field(default=ATTACH_TOL, gt=0)
    orientation_weight: float = Field(default=ORIENTATION_WEIGHT, ge=0)
    box_margin: float = Field(default=CONTACT_MARGIN, ge=0)  # parsed boxes carry two-decimal error
    sample_count: int = Field(default=DEFAULT_SAMPLE_COUNT, ge=1)
    primitives: PrimitiveParams = Field(default_factory=PrimitiveParams)
    radius_factor: tuple[float, float] = EVAL_RADIUS_FACTOR
    elevation_deg: tuple[float, float] = EVAL_ELEVATION_DEG
    azimuth_deg: tuple[float, float] = EVAL_AZIMUTH_DEG


@dataclass(frozen=True, eq=False)
class AttachmentState:
    """A point of `link` rigidly bound to the end effector (suction contact)."""

    link: str
    joint: JointSpec
    joint_frame: np.ndarray  # world pose of the joint frame; the parent link stays fixed
    anchor_local: np.ndarray
    rot_local: np.ndarray  # grasp orientation in the link frame
    q: float

    def link_pose(self, q: float | None = None) -> np.ndarray:
        return self.joint_frame @ joint_motion(self.joint, self.q if q is None else q)


def anchor_world(state: AttachmentState, q: float | None = None) -> np.ndarray:
    return apply_transform(state.link_pose(q), state.anchor_local)[0]


def _joint_value(joint: JointSpec, joint_frame: np.ndarray, link_pose: np.ndarray) -> float:
    relative = invert_transform(joint_frame) @ link_pose
    if joint.kind is JointKind.PRISMATIC:
        return float(relative[:3, 3] @ joint.axis_local)
    return float(Rotation.from_matrix(relative[:3, :3]).as_rotvec() @ joint.axis_local)


def surface_distance(tree: KinematicTree, link: str, link_pose: np.ndarray, point) -> float:
    """Exact distance from a world point to the link's triangle surface."""
    mesh = link_mesh(tree, link)
    if mesh is None or len(mesh.faces) == 0:
        return math.inf
    triangles = apply_transform(link_pose, mesh.vertices)[mesh.faces]
    query = np.tile(np.asarray(point, dtype=float).reshape(1, 3), (len(triangles), 1))
    closest = trimesh.triangles.closest_point(triangles, query)
    return float(np.linalg.norm(closest - query, axis=1).min())


def attach(
    tree: KinematicTree,
    fk,
    link: str,
    contact_world,
    attach_tol: float = ATTACH_TOL,
    orientation=None,
    q: float | None = None,
) -> AttachmentState:
    joint = tree.parent_joint(link)
    if joint is None or not joint.kind.movable:
        raise NotMovableError(f"Link '{link}' is not attached through a movable joint")
    contact = np.asarray(contact_world, dtype=float)
    distance = surface_distance(tree, link, fk[link], contact)
    if distance > attach_tol:
        raise ContactError(
            f"Contact is {distance:.4f} m from link '{link}' (tolerance {attach_tol} m)"
        )
    frame = joint_frame_world(fk, joint)
    rotation = np.eye(3) if orientation is None else np.asarray(orientation, dtype=float)
    return AttachmentState(
        link=link,
        joint=joint,
        joint_frame=frame,
        anchor_local=apply_transform(invert_transform(fk[link]), contact)[0],
        rot_local=fk[link][:3, :3].T @ rotation,
        q=_joint_value(joint, frame, fk[link]) if q is None else float(q),
    )


def _wrap(angle: float) -> float:
    return math.atan2(math.sin(angle), math.cos(angle))


def _twist_angle(rotation: np.ndarray, axis: np.ndarray) -> float:
    """Rotation angle of the twist component about `axis` (swing-twist split)."""
    x, y, z, w = Rotation.from_matrix(rotation).as_quat()
    return _wrap(2.0 * math.atan2(float(np.dot([x, y, z], axis)), w))


def step(
    state: AttachmentState,
    tree: KinematicTree,
    waypoint_pos,
    cfg: EvalConfig | None = None,
    waypoint_rot=None,
) -> tuple[float, float]:
    """Move the joint to the admissible value that best follows one waypoint.

    Returns (new q, residual distance between the anchor and the waypoint). Raises
    DetachedError carrying the previous q when the residual exceeds `detach_eps`.
    """
    cfg = cfg or EvalConfig()
    joint = tree.joint(state.joint.name)
    target = np.asarray(waypoint_pos, dtype=float)
    direction = state.joint_frame[:3, :3] @ joint.axis_local
    anchor = anchor_world(state)

    if joint.kind is JointKind.PRISMATIC:
        delta = float((target - anchor) @ direction)
    else:
        pivot = state.joint_frame[:3, 3]
        a = anchor - pivot
        b = target - pivot
        a -= (a @ direction) * direction
        b -= (b @ direction) * direction
        radius = float(np.linalg.norm(a))
        positional = 0.0
        if radius > 1e-12 and np.linalg.norm(b) > 1e-12:
            positional = math.atan2(float(direction @ np.cross(a, b)), float(a @ b))
        delta = positional
        rho = cfg.orientation_weight
        if waypoint_rot is not None and rho > 0:
            grasp = state.link_pose()[:3, :3] @ state.rot_local
            twist = _twist_angle(np.asarray(waypoint_rot, dtype=float) @ grasp.T, direction)
            delta = (radius**2 * positional + rho**2 * twist) / (radius**2 + rho**2)

    q = state.q + delta
    if joint.kind is not JointKind.CONTINUOUS:
        lower, upper = joint_range(joint)
        q = min(max(q, lower), upper)
    residual = float(np.linalg.norm(anchor_world(state, q) - target))
    if residual > cfg.detach_eps:
        raise DetachedError(state.q, residual)
    return q, residual


@dataclass(frozen=True)
class AttemptResult:
    direction: str
    d: float
    q_final: float
    steps: int = 0
    max_residual: float = 0.0
    failure: Failure | None = None


@dataclass(frozen=True)
class EpisodeResult:
    d: float
    success: bool
    attempt_results: tuple[AttemptResult, ...] = ()
    failure: Failure | None = None


def _run_attempt(
    tree: KinematicTree, link: str, trajectory: Trajectory, fk, q_init: float, cfg: EvalConfig
) -> AttemptResult:
    direction = trajectory.direction.value
    try:
        state = attach(
            tree, fk, link, trajectory.contact, cfg.attach_tol, trajectory.rotations[0], q_init
        )
    except ContactError:
        return AttemptResult(direction, 0.0, q_init, failure=Failure.NO_CONTACT)

    steps, max_residual, failure = 0, 0.0, None
    for position, rotation in zip(trajectory.positions[1:], trajectory.rotations[1:]):
        try:
            q, residual = step(state, tree, position, cfg, rotation)
        except DetachedError as e:
            logger.debug("Attachment broke", link=link, q=e.q, residual=e.residual)
            failure = Failure.DETACHED
            break
        state = dataclasses.replace(state, q=q)
        steps += 1
        max_residual = max(max_residual, residual)

    d = abs(state.q - q_init)
    if failure is None and d <= cfg.sigma:
        failure = Failure.WRONG_DIRECTION
    return AttemptResult(direction, d, state.q, steps, max_residual, failure)


def run_episode(
    tree: KinematicTree,
    link: str,
    trajectories: list[Trajectory],
    cfg: EvalConfig | None = None,
    config: JointConfig | None = None,
) -> EpisodeResult:
    """Execute up to `cfg.attempts` trajectories, each from the initial configuration.

    The episode succeeds when any attempt moves the joint strictly more than sigma.
    """
    cfg = cfg or EvalConfig()
    if not trajectories:
        return EpisodeResult(0.0, False, (), Failure.DEGENERATE)
    config = config or middle_joint_values(tree)
    joint = tree.parent_joint(link)
    if joint is None or not joint.kind.movable:
        return EpisodeResult(0.0, False, (), Failure.DEGENERATE)
    fk = forward_kinematics(tree, config)
    q_init = config[joint.name]

    attempts = tuple(
        _run_attempt(tree, link, trajectory, fk, q_init, cfg)
        for trajectory in trajectories[: cfg.attempts]
    )
    best = max(attempts, key=lambda a: a.d)
    success = best.d > cfg.sigma
    failure = None if success else (best.failure or Failure.WRONG_DIRECTION)
    return EpisodeResult(best.d, success, attempts, failure)


class EpisodeRow(BaseModel):
    object_id: str
    category: str
    seed: int
    link: str | None = None
    primitive: str | None = None
    d: float = 0.0
    success: bool = False
    failure: str | None = None


class CategoryStats(BaseModel):
    n: int
    successes: int
    rate: float


class EvalReport(BaseModel):
    per_category: dict[str, CategoryStats]
    average: float
    config: dict
    seeds: list[int]
    predictor: str
    version: str
    episodes: list[EpisodeRow] = Field(default_factory=list, exclude=True)


def _answer(predictor: Predictor, context: EpisodeContext) -> str:
    if isinstance(predictor, PredictionSource):
        return predict(predictor, context)
    return predictor(context)


@dataclass(frozen=True, eq=False)
class EpisodeScene:
    """What the robot sees at the start of an episode."""

    object_id: str
    config: JointConfig
    intrinsics: CameraIntrinsics
    pose: CameraPose
    annotation: ViewAnnotation
    target: Triad | None


def observe_episode(obj: CorpusObject, seed: int, cfg: EvalConfig | None = None) -> EpisodeScene:
    """Middle configuration, a seeded front-arc camera and a seeded visible target part."""
    cfg = cfg or EvalConfig()
    tree = obj.tree
    rng = rng_for(seed, obj.object_id, "episode")
    config = middle_joint_values(tree)
    intr = CameraIntrinsics()
    center, radius = object_bounds(tree, config)
    pose = camera_on_sphere(
        center,
        rng.uniform(*cfg.radius_factor) * radius,
        rng.uniform(*cfg.elevation_deg),
        rng.uniform(*cfg.azimuth_deg),
    )
    samples = sample_object_points(
        tree, cfg.sample_count, derive_seed(seed, obj.object_id, "surface")
    )
    label_db = LabelDB(category=obj.category, semantics=dict(obj.semantics))
    annotation = annotate_scene(tree, config, intr, pose, label_db, samples=samples)
    target = None
    if annotation.triads:
        target = annotation.triads[int(rng.integers(len(annotation.triads)))]
    return EpisodeScene(obj.object_id, config, intr, pose, annotation, target)


def ground_answers(
    scene: EpisodeScene, box_text: str, joint_text: str
) -> tuple[OrientedBox3D, AxisSegment]:
    """World-frame box and axis from REC-Link and REG-Joint answer text."""
    box_answer = parse_triad_answer(box_text, SubTask.REC_LINK)
    joint_answer = parse_triad_answer(joint_text, SubTask.REG_JOINT)
    depth_range = scene.annotation.depth_range
    box = OrientedBox3D.from_vertices(
        unproject_normalized(scene.intrinsics, depth_range, scene.pose, box_answer.boxes[0])
    )
    p0, p1 = unproject_normalized(scene.intrinsics, depth_range, scene.pose, joint_answer.axis)
    return box, AxisSegment(p0, p1, joint_answer.joint_kind)


def plan_attempts(
    obj: CorpusObject,
    scene: EpisodeScene,
    link: str,
    box: OrientedBox3D,
    axis: AxisSegment,
    seed: int,
    cfg: EvalConfig | None = None,
) -> tuple[PrimitiveKind, list[Trajectory]]:
    """Primitive, contact and one trajectory per direction (forward first)."""
    cfg = cfg or EvalConfig()
    name = obj.semantics.get(link) or default_semantic_name(link)
    kind = select_primitive(SemanticLabel(joint_kind=axis.kind, link_name=name))
    contact = choose_contact(
        box.padded(cfg.box_margin),
        scene.annotation.visible_cloud,
        kind,
        axis,
        derive_seed(seed, obj.object_id, "contact"),
    )
    joint = obj.tree.parent_joint(link)
    q = scene.config[joint.name]
    trajectories = [
        plan_trajectory(
            kind, contact, axis, default_params(joint, q, cfg.primitives, direction), direction
        )
        for direction in (Direction.FORWARD, Direction.BACKWARD)
    ]
    return kind, trajectories


def run_object_episode(
    obj: CorpusObject, seed: int, predictor: Predictor, cfg: EvalConfig | None = None
) -> EpisodeRow:
    """One evaluation episode: observe, ask for a box and an axis, act, simulate."""
    cfg = cfg or EvalConfig()
    row = EpisodeRow(object_id=obj.object_id, category=obj.category, seed=seed)
    scene = observe_episode(obj, seed, cfg)
    triad = scene.target
    if triad is None:
        return row.model_copy(update={"failure": Failure.DEGENERATE.value})
    row = row.model_copy(update={"link": triad.link})

    name = triad.label.link_name
    image_ref = f"{IMAGE_DIR}/{obj.object_id}_eval_{seed:04d}.png"
    key = f"{obj.object_id}:{seed}"
    prompts = {
        SubTask.REC_LINK: PROMPTS[SubTask.REC_LINK][0].format(name=name),
        SubTask.REG_JOINT: PROMPTS[SubTask.REG_JOINT][0].format(ref=name),
    }
    try:
        box_text, joint_text = (
            _answer(predictor, EpisodeContext(image_ref, prompt, task, triad, key))
            for task, prompt in prompts.items()
        )
        box, axis = ground_answers(scene, box_text, joint_text)
    except (TransportError, AnswerParseError, GeometryError, DomainError) as e:
        logger.debug("Prediction unusable", object_id=obj.object_id, seed=seed, error=str(e))
        return row.model_copy(update={"failure": Failure.DEGENERATE.value})

    try:
        kind, trajectories = plan_attempts(obj, scene, triad.link, box, axis, seed, cfg)
    except ContactError:
        return row.model_copy(update={"failure": Failure.NO_CONTACT.value})
    except DegenerateTrajectoryError:
        return row.model_copy(update={"failure": Failure.DEGENERATE.value})

    result = run_episode(obj.tree, triad.link, trajectories, cfg, scene.config)
    return row.model_copy(
        update={
            "primitive": kind.value,
            "d": result.d,
            "success": result.success,
            "failure": result.failure.value if result.failure else None,
        }
    )


def _episode_job(args: tuple) -> EpisodeRow:
    obj, seed, predictor, cfg = args
    try:
        return run_object_episode(obj, seed, predictor, cfg)
    except A3Error as e:
        logger.warning("Episode failed", object_id=obj.object_id, seed=seed, error=str(e), kind=e.kind)
        return EpisodeRow(
            object_id=obj.object_id, category=obj.category, seed=seed, failure=Failure.DEGENERATE.value
        )


def summarize(rows: list[EpisodeRow]) -> tuple[dict[str, CategoryStats], float]:
    """Per-category success rates and their unweighted mean."""
    grouped = defaultdict(list)
    for row in rows:
        grouped[row.category].append(row.success)
    per_category = {
        category: CategoryStats(n=len(flags), successes=sum(flags), rate=sum(flags) / len(flags))
        for category, flags in sorted(grouped.items())
    }
    average = (
        float(np.mean([stats.rate for stats in per_category.values()])) if per_category else 0.0
    )
    return per_category, average


def _toolkit_version() -> str:
    try:
        return version("a3kit")
    except PackageNotFoundError:
        return "0.0.0"


def evaluate(
    corpus: Iterable[CorpusObject],
    predictor: Predictor,
    cfg: EvalConfig | None = None,
    seeds: Iterable[int] = (0,),
    workers: int = 1,
    progress: bool = False,
) -> EvalReport:
    """Run one episode per (object, seed); rows come back in submission order."""
    cfg = cfg or EvalConfig()
    seeds = [int(s) for s in seeds]
    jobs = [(obj, seed, predictor, cfg) for obj in corpus for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(tqdm(executor.map(_episode_job, jobs), total=len(jobs), disable=not progress))
    else:
        rows = [_episode_job(job) for job in tqdm(jobs, disable=not progress)]

    per_category, average = summarize(rows)
    label = predictor.kind if isinstance(predictor, PredictionSource) else "custom"
    logger.info("Evaluation finished", episodes=len(rows), average=round(average, 4), predictor=label)
    return EvalReport(
        per_category=per_category,
        average=average,
        config=cfg.model_dump(mode="json"),
        seeds=seeds,
        predictor=label,
        version=_toolkit_version(),
        episodes=rows,
    )


def write_report_json(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


def write_episodes_csv(report: EvalReport, path: str | Path) -> None:
    fields = list(EpisodeRow.model_fields)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in report.episodes:
            writer.writerow(row.model_dump(mode="json"))
