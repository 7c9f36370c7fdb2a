"""a3kit command line - annotation, dataset building, trajectory planning, evaluation and debug views."""

import argparse
import logging
import os
import sys
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from rich.console import Console
from rich.table import Table
from tqdm import tqdm

from .annotation import ViewAnnotation
from .config import THREADS_ENV, VLM_ENDPOINT
from .corpus import CorpusObject, load_corpus
from .dataset_builder import (
    DatasetSettings,
    ObjectDataset,
    SubTask,
    annotate_views,
    build_object_dataset,
    sample_views,
)
from .debug_render import render_view_svg, write_point_cloud_ply
from .errors import A3Error, ConfigError, GeometryError
from .fixtures import load_fixture
from .logging_config import configure_logging
from .model_io import PredictionSource, answer_for
from .primitives import PrimitiveParams, trajectories_to_json
from .sim_eval import (
    EvalConfig,
    EvalReport,
    evaluate,
    ground_answers,
    observe_episode,
    plan_attempts,
    write_episodes_csv,
    write_report_json,
)
from .skills import LabelDB, SkillRuleTable

# Logging Configuration
logger = configure_logging()

PREDICTORS = {"ground-truth": "ground_truth", "perturbed": "perturbed", "remote": "remote"}
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class CliConfig(BaseModel):
    """Optional `--config` TOML: `[dataset]`, `[eval]` and `[primitives]` tables."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    dataset: DatasetSettings = Field(default_factory=DatasetSettings)
    evaluation: EvalConfig = Field(default_factory=EvalConfig, alias="eval")
    primitives: PrimitiveParams | None = None

    def eval_config(self) -> EvalConfig:
        if self.primitives is None:
            return self.evaluation
        return self.evaluation.model_copy(update={"primitives": self.primitives})


def load_config(path: str | Path | None) -> CliConfig:
    if path is None:
        return CliConfig()
    try:
        return CliConfig.model_validate(toml.load(path))
    except (OSError, toml.TomlDecodeError) as e:
        raise ConfigError(f"Cannot read config file '{path}': {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid config file '{path}': {e}") from e


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        threads = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got '{raw}'") from e
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {threads}")
    return threads


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _multiplier(text: str) -> tuple[str, int]:
    task, sep, count = text.partition("=")
    try:
        task = SubTask(task).value
        count = int(count)
    except ValueError:
        sep = ""
    if not sep or count < 0:
        choices = ", ".join(t.value for t in SubTask)
        raise argparse.ArgumentTypeError(f"expected TASK=N with TASK in {{{choices}}}, got '{text}'")
    return task, count


def _map_jobs(fn: Callable, jobs: list, workers: int, desc: str) -> list:
    """Results in submission order, inline for a single worker."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(tqdm(executor.map(fn, jobs), total=len(jobs), desc=desc, leave=False))
    return [fn(job) for job in tqdm(jobs, desc=desc, leave=False)]


def _load_objects(args: argparse.Namespace) -> list[CorpusObject]:
    if getattr(args, "fixture", None):
        tree, fixture = load_fixture(args.fixture)
        return [CorpusObject(fixture.name, fixture.category, tree, fixture.semantics)]
    if getattr(args, "urdf", None):
        return load_corpus(args.urdf)
    objects = load_corpus(args.corpus)
    if not objects:
        raise ConfigError(f"Corpus '{args.corpus}' holds no objects")
    return objects


def _dataset_job(job: tuple) -> ObjectDataset:
    obj, seed, settings, rules = job
    label_db = LabelDB(rules=rules, category=obj.category, semantics=dict(obj.semantics))
    return build_object_dataset(
        obj.tree, obj.object_id, obj.category, label_db, seed, settings
    )


def _write_jsonl(path: Path, records: Iterable[BaseModel]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(record.model_dump_json() + "\n")
            count += 1
    return count


def _dataset_settings(args: argparse.Namespace, config: CliConfig) -> DatasetSettings:
    updates = {}
    if args.views is not None:
        updates["views"] = args.views
    if args.sample_count is not None:
        updates["sample_count"] = args.sample_count
    multipliers = getattr(args, "multiplier", None)
    if multipliers:
        updates["multipliers"] = {**config.dataset.multipliers, **dict(multipliers)}
    return config.dataset.model_copy(update=updates)


def cmd_annotate(args: argparse.Namespace, config: CliConfig, threads: int) -> int:
    objects = _load_objects(args)
    settings = _dataset_settings(args, config)
    rules = SkillRuleTable.load(args.rules) if args.rules else SkillRuleTable.default()
    jobs = [(obj, args.seed, settings, rules) for obj in objects]
    datasets = _map_jobs(_dataset_job, jobs, threads, "objects")

    output = Path(args.output)
    manifest_dir = output / "manifests"
    manifest_dir.mkdir(parents=True, exist_ok=True)
    for dataset in datasets:
        for manifest in dataset.manifests:
            path = manifest_dir / f"{manifest.object_id}_{manifest.view:03d}.json"
            path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    records = _write_jsonl(
        output / "annotations.jsonl", (r for d in datasets for r in d.annotations)
    )
    written = {"annotations": records}
    if args.command == "build-dataset":
        written["samples"] = _write_jsonl(
            output / "samples.jsonl", (s for d in datasets for s in d.samples)
        )
    logger.info("Dataset written", output=str(output), objects=len(objects), **written)
    return 0


def cmd_plan(args: argparse.Namespace, config: CliConfig, threads: int) -> int:
    obj = _load_objects(args)[0]
    cfg = config.eval_config()
    scene = observe_episode(obj, args.seed, cfg)
    link = args.link or (scene.target.link if scene.target else None)
    triad = next((t for t in scene.annotation.triads if t.link == link), None)
    if triad is None:
        raise GeometryError(f"Link '{link}' is not a visible movable part of '{obj.object_id}'")

    box_text = args.box or answer_for(SubTask.REC_LINK, triad)
    joint_text = args.joint or answer_for(SubTask.REG_JOINT, triad)
    box, axis = ground_answers(scene, box_text, joint_text)
    kind, trajectories = plan_attempts(obj, scene, triad.link, box, axis, args.seed, cfg)

    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)
    path = output / "trajectories.json"
    document = trajectories_to_json(
        trajectories,
        object_id=obj.object_id,
        link=triad.link,
        seed=args.seed,
        primitive=kind.value,
        box_text=box_text,
        joint_text=joint_text,
    )
    path.write_text(document + "\n", encoding="utf-8")
    logger.info("Trajectories written", path=str(path), link=triad.link, primitive=kind.value)
    return 0


def print_report(report: EvalReport, console: Console | None = None) -> None:
    table = Table(title=f"Success rate ({report.predictor})")
    table.add_column("Category")
    table.add_column("Episodes", justify="right")
    table.add_column("Successes", justify="right")
    table.add_column("Rate", justify="right")
    for category, stats in report.per_category.items():
        table.add_row(category or "-", str(stats.n), str(stats.successes), f"{stats.rate:.2f}")
    table.add_section()
    table.add_row("AVG", "", "", f"{report.average:.2f}", style="bold")
    (console or Console()).print(table)


def cmd_eval(args: argparse.Namespace, config: CliConfig, threads: int) -> int:
    objects = _load_objects(args)
    cfg = config.eval_config()
    if args.sigma is not None:
        cfg = cfg.model_copy(update={"sigma": args.sigma})
    kind = PREDICTORS[args.predictor]
    if kind == "perturbed":
        predictor = PredictionSource.perturbed(args.noise, seed=args.seed)
    elif kind == "remote":
        predictor = PredictionSource.remote(args.endpoint)
    else:
        predictor = PredictionSource.ground_truth()

    seeds = range(args.seed, args.seed + args.episodes)
    report = evaluate(objects, predictor, cfg, seeds, workers=threads, progress=True)

    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)
    write_report_json(report, output / "report.json")
    write_episodes_csv(report, output / "episodes.csv")
    print_report(report)
    return 0


def _render_job(job: tuple) -> list[tuple[int, ViewAnnotation]]:
    obj, seed, settings, rules = job
    views = sample_views(
        obj.tree,
        settings.views,
        seed,
        obj.object_id,
        radius_factor=settings.radius_factor,
        elevation_deg=settings.elevation_deg,
        azimuth_deg=settings.azimuth_deg,
    )
    label_db = LabelDB(rules=rules, category=obj.category, semantics=dict(obj.semantics))
    annotations = annotate_views(obj.tree, views, label_db, settings.sample_count)
    return [(view.index, annotation) for view, annotation in zip(views, annotations)]


def cmd_render_debug(args: argparse.Namespace, config: CliConfig, threads: int) -> int:
    objects = _load_objects(args)
    settings = _dataset_settings(args, config)
    rules = SkillRuleTable.load(args.rules) if args.rules else SkillRuleTable.default()
    jobs = [(obj, args.seed, settings, rules) for obj in objects]
    rendered = _map_jobs(_render_job, jobs, threads, "objects")

    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)
    files = 0
    for obj, views in zip(objects, rendered):
        for index, annotation in views:
            stem = f"{obj.object_id}_{index:03d}"
            render_view_svg(annotation, output / f"{stem}.svg", title=stem)
            write_point_cloud_ply(annotation, output / f"{stem}.ply")
            files += 2
    logger.info("Debug views written", output=str(output), files=files)
    return 0


def _add_object_source(parser: argparse.ArgumentParser, default_corpus: str | None = None) -> None:
    group = parser.add_mutually_exclusive_group(required=default_corpus is None)
    group.add_argument("--urdf", help="Single URDF file (category from a <name>.json sidecar)")
    group.add_argument("--fixture", help="Name of a bundled fixture object")
    group.add_argument(
        "--corpus",
        default=default_corpus,
        help='"fixtures", a directory of URDFs or a PartNet-Mobility importer TOML',
    )


def _add_view_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--views", type=_positive_int, default=None, help="Views per object")
    parser.add_argument("--seed", type=int, default=0, help="Master seed")
    parser.add_argument("--sample-count", type=_positive_int, default=None, help="Surface points per link")
    parser.add_argument("--rules", default=None, help="Replacement skill rule table (TOML)")
    parser.add_argument("-o", "--output", required=True, help="Output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="a3kit",
        description="Articulation triads from URDF objects: annotate, build datasets, plan and evaluate.",
    )
    parser.add_argument("--log-level", default="INFO", choices=LOG_LEVELS)
    parser.add_argument("--log-json", action="store_true", help="JSON log lines instead of plain text")
    parser.add_argument(
        "--threads", type=_positive_int, default=None, help=f"Worker processes (default ${THREADS_ENV} or 1)"
    )
    parser.add_argument("--config", default=None, help="TOML with [dataset], [eval] and [primitives] tables")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    annotate = subparsers.add_parser("annotate", help="Write per-view triad records and scene manifests")
    _add_object_source(annotate)
    _add_view_options(annotate)

    dataset = subparsers.add_parser("build-dataset", help="Also write the instruction-following samples")
    _add_object_source(dataset)
    _add_view_options(dataset)
    dataset.add_argument(
        "--multiplier",
        type=_multiplier,
        action="append",
        metavar="TASK=N",
        help="Prompt paraphrases per sample for one sub-task (repeatable)",
    )

    plan = subparsers.add_parser("plan", help="Write manipulation trajectories for one part")
    source = plan.add_mutually_exclusive_group(required=True)
    source.add_argument("--urdf", help="Single URDF file")
    source.add_argument("--fixture", help="Name of a bundled fixture object")
    plan.add_argument("--link", default=None, help="Target link (default: the seeded evaluation target)")
    plan.add_argument("--seed", type=int, default=0, help="Episode seed (camera and contact choice)")
    plan.add_argument("--box", default=None, help="REC-Link answer text (default: ground truth)")
    plan.add_argument("--joint", default=None, help="REG-Joint answer text (default: ground truth)")
    plan.add_argument("-o", "--output", required=True, help="Output directory")

    evaluation = subparsers.add_parser("eval", help="Closed-loop benchmark in the quasi-static simulator")
    _add_object_source(evaluation, default_corpus="fixtures")
    evaluation.add_argument("--predictor", default="ground-truth", choices=tuple(PREDICTORS))
    evaluation.add_argument("--noise", type=float, default=0.05, help="Perturbed predictor std (normalized)")
    evaluation.add_argument("--endpoint", default=VLM_ENDPOINT, help="Remote predictor URL")
    evaluation.add_argument("--seed", type=int, default=0, help="First episode seed")
    evaluation.add_argument("--episodes", type=_positive_int, default=1, help="Seeds per object")
    evaluation.add_argument("--sigma", type=float, default=None, help="Success threshold override")
    evaluation.add_argument("-o", "--output", default="results", help="Output directory")

    render = subparsers.add_parser("render-debug", help="SVG overlays and PLY point clouds per view")
    _add_object_source(render)
    _add_view_options(render)
    return parser


COMMANDS = {
    "annotate": cmd_annotate,
    "build-dataset": cmd_annotate,
    "plan": cmd_plan,
    "eval": cmd_eval,
    "render-debug": cmd_render_debug,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    configure_logging(
        level=getattr(logging, args.log_level), dev_mode=not args.log_json, force=True
    )
    try:
        config = load_config(args.config)
        threads = resolve_threads(args.threads)
        return COMMANDS[args.command](args, config, threads)
    except A3Error as e:
        logger.error("Pipeline failed", command=args.command, error=str(e), kind=e.kind)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
