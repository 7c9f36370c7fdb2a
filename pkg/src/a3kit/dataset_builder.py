"""View sampling and construction of the four instruction-following sub-task datasets."""

import math
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .annotation import Triad, ViewAnnotation, annotate_scene, scene_triangles
from .camera_geometry import CameraIntrinsics, CameraPose, look_at
from .config import (
    CAMERA_AZIMUTH_DEG,
    CAMERA_ELEVATION_DEG,
    CAMERA_RADIUS_FACTOR,
    DEFAULT_SAMPLE_COUNT,
    IMAGE_DIR,
    TASK_MULTIPLIERS,
    VIEWS_PER_OBJECT,
)
from .errors import DomainError, GeometryError
from .grammar import GRAMMAR
from .logging_config import configure_logging
from .seeding import derive_seed, rng_for
from .skills import LabelDB
from .urdf_model import (
    JointConfig,
    KinematicTree,
    forward_kinematics,
    middle_joint_values,
    random_joint_values,
    sample_object_points,
)

# Logging Configuration
logger = configure_logging()


class SubTask(StrEnum):
    DETECTION = "Detection"
    REC_LINK = "RECLink"
    REG_JOINT = "REGJoint"
    REC_ACTION = "RECAction"


# First entry of each list is the canonical wording; the rest are paraphrases
PROMPTS = {
    SubTask.DETECTION: [
        "Detect all manipulable object parts and provide their 3D bounding boxes.",
        "Find every part of this object that can be manipulated and give its 3D bounding box.",
        "Locate all movable parts of the object and output their 3D bounding boxes.",
        "Which parts of this object can be manipulated? Provide a 3D bounding box for each.",
    ],
    SubTask.REC_LINK: [
        "Please provide the 3D bounding box of the region this sentence describes: {name}.",
        "Give the 3D bounding box of the object part this phrase refers to: {name}.",
        "Locate the part described as '{name}' and provide its 3D bounding box.",
        "Where is the {name}? Answer with its 3D bounding box.",
    ],
    SubTask.REG_JOINT: [
        "Please provide the joint's type and its 3D axis linked to the object part: {ref}.",
        "What kind of joint connects this object part, and where is its 3D axis: {ref}?",
        "Describe the articulation of the object part {ref}: joint type and 3D axis.",
    ],
    SubTask.REC_ACTION: [
        "Please execute the task described with 3D rotated bounding box representations "
        "by the following instruction: {instruction}.",
        "Ground the following instruction to an action and the 3D rotated bounding box of the "
        "target part: {instruction}.",
        "Which action and which 3D rotated bounding box does this instruction require: "
        "{instruction}?",
    ],
}

INSTRUCTIONS = {
    "slide_open": "Slide the {link} open",
    "slide_close": "Slide the {link} closed",
    "flap_open": "Open the {link}",
    "flap_close": "Close the {link}",
    "cap": "Put the {link} back on",
    "uncap": "Take off the {link}",
    "pick": "Pick up the {link}",
    "place": "Put down the {link}",
    "slide_in": "Push the {link} in",
    "slide_out": "Pull out the {link}",
    "wipe": "Wipe the {link}",
    "press": "Press the {link}",
    "rotate": "Rotate the {link}",
    "StatusComplete": "Leave the {link} as it is",
}

NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten")


class DatasetSettings(BaseModel):
    """The `[dataset]` table of a CLI config file."""

    model_config = ConfigDict(extra="forbid")

    views: int = Field(default=VIEWS_PER_OBJECT, ge=1)
    sample_count: int = Field(default=DEFAULT_SAMPLE_COUNT, ge=1)
    multipliers: dict[str, int] = Field(default_factory=lambda: dict(TASK_MULTIPLIERS))
    radius_factor: tuple[float, float] = CAMERA_RADIUS_FACTOR
    elevation_deg: tuple[float, float] = CAMERA_ELEVATION_DEG
    azimuth_deg: tuple[float, float] = CAMERA_AZIMUTH_DEG


@dataclass(frozen=True)
class LightingSpec:
    """Renderer hints only; nothing in the toolkit consumes them."""

    intensity: float
    azimuth_deg: float
    elevation_deg: float
    color_temperature_k: float


@dataclass(frozen=True, eq=False)
class ViewSpec:
    object_id: str
    index: int
    intrinsics: CameraIntrinsics
    pose: CameraPose
    joints: JointConfig
    seed: int
    lighting: LightingSpec
    image_ref: str | None = None
    augmented_image_ref: str | None = None


class InstructionSample(BaseModel):
    task: SubTask
    image: str
    prompt: str
    answer: str
    links: list[str]
    augmented_image: str | None = None


class SceneManifest(BaseModel):
    object_id: str
    view: int
    image: str
    augmented_image: str | None = None
    seed: int
    intrinsics: dict[str, float]
    world_to_camera: list[list[float]]
    joints: dict[str, float]
    lighting: dict[str, float]
    depth_range: tuple[float, float] | None = None


class TriadRecord(BaseModel):
    link: str
    name: str
    joint: str
    actions: list[str]
    visibility: float
    bbox: list[list[float]]
    axis: list[list[float]]
    bbox_text: str
    axis_text: str


class AnnotationRecord(BaseModel):
    object_id: str
    category: str
    view: int
    image: str
    depth_range: tuple[float, float]
    triads: list[TriadRecord]


@dataclass
class ObjectDataset:
    manifests: list[SceneManifest] = field(default_factory=list)
    annotations: list[AnnotationRecord] = field(default_factory=list)
    samples: list[InstructionSample] = field(default_factory=list)


def object_bounds(tree: KinematicTree, config: JointConfig | None = None) -> tuple[np.ndarray, float]:
    """Center and radius of a sphere around all link geometry (middle configuration by default)."""
    config = config or middle_joint_values(tree)
    triangles = scene_triangles(tree, forward_kinematics(tree, config))
    if len(triangles) == 0:
        raise GeometryError(f"Object '{tree.name}' has no link geometry")
    vertices = triangles.reshape(-1, 3)
    center = (vertices.min(axis=0) + vertices.max(axis=0)) / 2.0
    radius = float(np.linalg.norm(vertices - center, axis=1).max())
    return center, max(radius, 1e-3)


def camera_on_sphere(center, distance: float, elevation_deg: float, azimuth_deg: float) -> CameraPose:
    """Camera looking at `center` from the given spherical position (z up, azimuth from +x)."""
    elevation, azimuth = math.radians(elevation_deg), math.radians(azimuth_deg)
    offset = distance * np.array(
        [
            math.cos(elevation) * math.cos(azimuth),
            math.cos(elevation) * math.sin(azimuth),
            math.sin(elevation),
        ]
    )
    center = np.asarray(center, dtype=float)
    return look_at(center + offset, center, up=(0.0, 0.0, 1.0))


def sample_views(
    tree: KinematicTree,
    n_views: int = VIEWS_PER_OBJECT,
    master_seed: int = 0,
    object_id: str | None = None,
    intrinsics: CameraIntrinsics | None = None,
    radius_factor: tuple[float, float] = CAMERA_RADIUS_FACTOR,
    elevation_deg: tuple[float, float] = CAMERA_ELEVATION_DEG,
    azimuth_deg: tuple[float, float] = CAMERA_AZIMUTH_DEG,
    image_dir: str = IMAGE_DIR,
) -> list[ViewSpec]:
    """Random cameras, joint values and lighting, each view regenerated from (object, index, seed)."""
    if n_views < 1:
        raise DomainError(f"n_views must be at least 1, got {n_views}")
    object_id = object_id or tree.name
    intrinsics = intrinsics or CameraIntrinsics()
    center, radius = object_bounds(tree)

    views = []
    for index in range(n_views):
        seed = derive_seed(master_seed, object_id, index)
        rng = rng_for(master_seed, object_id, index)
        pose = camera_on_sphere(
            center,
            rng.uniform(*radius_factor) * radius,
            rng.uniform(*elevation_deg),
            rng.uniform(*azimuth_deg),
        )
        joints = random_joint_values(tree, rng)
        lighting = LightingSpec(
            intensity=float(rng.uniform(0.6, 1.4)),
            azimuth_deg=float(rng.uniform(0.0, 360.0)),
            elevation_deg=float(rng.uniform(20.0, 80.0)),
            color_temperature_k=float(rng.uniform(4000.0, 6500.0)),
        )
        views.append(
            ViewSpec(
                object_id=object_id,
                index=index,
                intrinsics=intrinsics,
                pose=pose,
                joints=joints,
                seed=seed,
                lighting=lighting,
                image_ref=f"{image_dir}/{object_id}_{index:03d}.png",
            )
        )
    return views


def format_triad_text(triad: Triad) -> tuple[str, str, str]:
    """(bbox_text, axis_text, label_text) in the two-decimal answer grammar."""
    label = triad.label
    label_text = f"{label.link_name}, {label.joint_kind}, {' '.join(label.actions)}".rstrip()
    return GRAMMAR.format_points(triad.box_norm), GRAMMAR.format_points(triad.axis_norm), label_text


def instruction_for(action: str, link_name: str) -> str:
    return INSTRUCTIONS[action].format(link=link_name)


def detection_answer(triads: list[Triad]) -> str:
    count = len(triads)
    number = NUMBER_WORDS[count] if count < len(NUMBER_WORDS) else str(count)
    parts = "; ".join(f"{t.label.link_name}: {format_triad_text(t)[0]}" for t in triads)
    if count == 1:
        return f"There is one manipulable object part with its 3D bounding box: {parts}"
    return f"There are {number} manipulable object parts with their 3D bounding boxes: {parts}"


def joint_answer(triad: Triad) -> str:
    return f"Joint type: {triad.label.joint_kind}, axis: {format_triad_text(triad)[1]}"


def action_answer(action: str, triad: Triad) -> str:
    return f"Action type: {action}, bounding box: {format_triad_text(triad)[0]}"


def _prompts(task: SubTask, multipliers: dict[str, int], rng: np.random.Generator) -> list[str]:
    templates = PROMPTS[task]
    count = min(max(int(multipliers.get(task.value, 1)), 0), len(templates))
    picks = rng.choice(len(templates), size=count, replace=False)
    return [templates[i] for i in sorted(picks)]


def build_samples(
    triads: list[Triad],
    image_ref: str,
    seed: int,
    multipliers: dict[str, int] | None = None,
    augmented_image_ref: str | None = None,
) -> list[InstructionSample]:
    """All sub-task samples for one annotated view.

    With unit multipliers this is 1 Detection + 1 REC-Link and 1 REG-Joint per link
    + 1 REC-Action per (link, action); each multiplier selects that many distinct
    prompt wordings for its task.
    """
    if not triads:
        return []
    multipliers = {**TASK_MULTIPLIERS, **(multipliers or {})}
    rng = np.random.default_rng(seed)
    samples = []

    def add(task: SubTask, prompt: str, answer: str, links: list[str]):
        samples.append(
            InstructionSample(
                task=task,
                image=image_ref,
                prompt=prompt,
                answer=answer,
                links=links,
                augmented_image=augmented_image_ref,
            )
        )

    links = [t.link for t in triads]
    for template in _prompts(SubTask.DETECTION, multipliers, rng):
        add(SubTask.DETECTION, template, detection_answer(triads), links)

    for triad in triads:
        bbox_text, _, _ = format_triad_text(triad)
        for template in _prompts(SubTask.REC_LINK, multipliers, rng):
            add(SubTask.REC_LINK, template.format(name=triad.label.link_name), bbox_text, [triad.link])

    for triad in triads:
        bbox_text, _, _ = format_triad_text(triad)
        for template in _prompts(SubTask.REG_JOINT, multipliers, rng):
            ref = bbox_text if rng.random() < 0.5 else triad.label.link_name
            add(SubTask.REG_JOINT, template.format(ref=ref), joint_answer(triad), [triad.link])

    for triad in triads:
        for action in triad.label.actions:
            instruction = instruction_for(action, triad.label.link_name)
            for template in _prompts(SubTask.REC_ACTION, multipliers, rng):
                add(
                    SubTask.REC_ACTION,
                    template.format(instruction=instruction),
                    action_answer(action, triad),
                    [triad.link],
                )
    return samples


def _round_rows(rows) -> list[list[float]]:
    return [[round(float(v), 6) for v in row] for row in np.asarray(rows)]


def manifest_for(view: ViewSpec, annotation: ViewAnnotation | None = None) -> SceneManifest:
    intr = view.intrinsics
    depth_range = None
    if annotation is not None:
        depth_range = (annotation.depth_range.z_min, annotation.depth_range.z_max)
    return SceneManifest(
        object_id=view.object_id,
        view=view.index,
        image=view.image_ref or "",
        augmented_image=view.augmented_image_ref,
        seed=view.seed,
        intrinsics={
            "width": intr.width,
            "height": intr.height,
            "fx": intr.fx,
            "fy": intr.fy,
            "cx": intr.cx,
            "cy": intr.cy,
        },
        world_to_camera=_round_rows(view.pose.matrix),
        joints=dict(view.joints.values),
        lighting={
            "intensity": view.lighting.intensity,
            "azimuth_deg": view.lighting.azimuth_deg,
            "elevation_deg": view.lighting.elevation_deg,
            "color_temperature_k": view.lighting.color_temperature_k,
        },
        depth_range=depth_range,
    )


def annotation_record(view: ViewSpec, annotation: ViewAnnotation, category: str) -> AnnotationRecord:
    triads = []
    for triad in annotation.triads:
        bbox_text, axis_text, _ = format_triad_text(triad)
        triads.append(
            TriadRecord(
                link=triad.link,
                name=triad.label.link_name,
                joint=triad.label.joint_kind,
                actions=list(triad.label.actions),
                visibility=round(triad.visibility, 6),
                bbox=_round_rows(triad.box_norm),
                axis=_round_rows(triad.axis_norm),
                bbox_text=bbox_text,
                axis_text=axis_text,
            )
        )
    return AnnotationRecord(
        object_id=view.object_id,
        category=category,
        view=view.index,
        image=view.image_ref or "",
        depth_range=(annotation.depth_range.z_min, annotation.depth_range.z_max),
        triads=triads,
    )


def annotate_views(
    tree: KinematicTree,
    views: list[ViewSpec],
    label_db: LabelDB,
    sample_count: int = DEFAULT_SAMPLE_COUNT,
) -> list[ViewAnnotation]:
    """Annotate each view; surface samples are drawn once per object from the first view's seed."""
    if not views:
        return []
    samples = sample_object_points(tree, sample_count, views[0].seed)
    return [
        annotate_scene(tree, view.joints, view.intrinsics, view.pose, label_db, samples=samples)
        for view in views
    ]


def build_object_dataset(
    tree: KinematicTree,
    object_id: str,
    category: str = "",
    label_db: LabelDB | None = None,
    master_seed: int = 0,
    settings: DatasetSettings | None = None,
    intrinsics: CameraIntrinsics | None = None,
) -> ObjectDataset:
    """Views, annotations and instruction samples for one object."""
    settings = settings or DatasetSettings()
    label_db = label_db or LabelDB(category=category)
    views = sample_views(
        tree,
        settings.views,
        master_seed,
        object_id,
        intrinsics,
        settings.radius_factor,
        settings.elevation_deg,
        settings.azimuth_deg,
    )
    annotations = annotate_views(tree, views, label_db, settings.sample_count)
    dataset = ObjectDataset()
    for view, annotation in zip(views, annotations):
        dataset.manifests.append(manifest_for(view, annotation))
        dataset.annotations.append(annotation_record(view, annotation, category))
        dataset.samples.extend(
            build_samples(
                list(annotation.triads),
                view.image_ref or "",
                derive_seed(view.seed, "samples"),
                settings.multipliers,
                view.augmented_image_ref,
            )
        )
    logger.info(
        "Object dataset built",
        object_id=object_id,
        views=len(views),
        samples=len(dataset.samples),
    )
    return dataset
