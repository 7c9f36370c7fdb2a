"""Robot skill library, rule-based skill selection and the optional remote skill-selection client."""

import fnmatch
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal

import httpx
import toml
from pydantic import BaseModel, Field, ValidationError, field_validator

from .config import CLOSED_FRACTION, REMOTE_TIMEOUT, SKILL_ENDPOINT
from .errors import ConfigError, TransportError
from .logging_config import configure_logging
from .urdf_model import JointKind, JointSpec, joint_range

# Logging Configuration
logger = configure_logging()

SKILL_LIBRARY = (
    "slide_open",
    "slide_close",
    "flap_open",
    "flap_close",
    "cap",
    "uncap",
    "pick",
    "place",
    "slide_in",
    "slide_out",
    "wipe",
    "press",
    "rotate",
    "StatusComplete",
)

FALLBACK_ACTIONS = {
    "prismatic": ["slide_in", "slide_out"],
    "revolute": ["flap_open", "flap_close"],
}

STATE_ALIASES = {"on": "closed", "off": "open"}


def _check_actions(actions: list[str]) -> list[str]:
    unknown = [a for a in actions if a not in SKILL_LIBRARY]
    if unknown:
        raise ValueError(f"Actions outside the skill library: {unknown}")
    return actions


def label_kind(kind: JointKind | str) -> str:
    """Two-way articulation label: continuous joints are revolute."""
    kind = JointKind(kind)
    if kind is JointKind.PRISMATIC:
        return "prismatic"
    if kind.rotational:
        return "revolute"
    return "fixed"


def joint_state(joint: JointSpec, q: float) -> str:
    """'closed' when the joint sits in the lower half of its travel, else 'open'."""
    if joint.kind is JointKind.CONTINUOUS:
        return "closed"
    lower, upper = joint_range(joint)
    if upper <= lower:
        return "closed"
    return "closed" if (q - lower) / (upper - lower) <= CLOSED_FRACTION else "open"


class SkillRule(BaseModel):
    category: str = "*"
    link: str = "*"
    joint: Literal["revolute", "prismatic"] | None = None
    state: Literal["any", "closed", "open"] = "any"
    actions: list[str] = Field(min_length=1)

    @field_validator("state", mode="before")
    @classmethod
    def _alias_state(cls, value):
        if isinstance(value, str):
            value = value.lower()
            return STATE_ALIASES.get(value, value)
        return value

    @field_validator("actions")
    @classmethod
    def _library_only(cls, value):
        return _check_actions(value)

    def matches(self, category: str, link_name: str, joint_kind: str, state: str) -> bool:
        return (
            fnmatch.fnmatch(category.lower(), self.category.lower())
            and fnmatch.fnmatch(link_name.lower(), self.link.lower())
            and (self.joint is None or self.joint == joint_kind)
            and (self.state == "any" or self.state == STATE_ALIASES.get(state, state))
        )


class SkillRuleTable(BaseModel):
    rules: list[SkillRule] = Field(default_factory=list, alias="rule")

    model_config = {"populate_by_name": True}

    @classmethod
    def loads(cls, text: str) -> "SkillRuleTable":
        try:
            return cls.model_validate(toml.loads(text))
        except toml.TomlDecodeError as e:
            raise ConfigError(f"Skill rule table is not valid TOML: {e}") from e
        except ValidationError as e:
            raise ConfigError(f"Invalid skill rule table: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> "SkillRuleTable":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read skill rule table '{path}': {e}") from e
        return cls.loads(text)

    @classmethod
    def default(cls) -> "SkillRuleTable":
        text = resources.files("a3kit").joinpath("data/skill_rules.toml").read_text(encoding="utf-8")
        return cls.loads(text)


def select_actions(
    rules: SkillRuleTable, category: str, link_name: str, joint_kind: str, state: str
) -> list[str]:
    """Actions of the first matching rule, else the joint-kind fallback."""
    kind = label_kind(joint_kind)
    if kind == "fixed":
        return []
    for rule in rules.rules:
        if rule.matches(category, link_name, kind, state):
            return list(rule.actions)
    return list(FALLBACK_ACTIONS[kind])


class LinkInfo(BaseModel):
    name: str
    joint: str
    state: str


class SkillTask(BaseModel):
    task: str
    actions: list[str]

    @field_validator("actions")
    @classmethod
    def _library_only(cls, value):
        return _check_actions(value)


class SkillRequest(BaseModel):
    category: str
    links: list[LinkInfo]
    history: list[SkillTask] = Field(default_factory=list)


class SkillResponse(BaseModel):
    tasks: list[SkillTask]


def build_skill_prompt(
    category: str, links: list[LinkInfo], history: list[SkillTask] | None = None
) -> str:
    """Render the grounding-task generation prompt for a language model."""
    library = ", ".join(f'"{name}"' for name in SKILL_LIBRARY)
    link_info = "; ".join(f"{link.name} (joint: {link.joint}, status: {link.state})" for link in links)
    previous = SkillResponse(tasks=list(history or [])).model_dump_json()
    return (
        "Role and Task Description:\n"
        "Develop a systematic approach for generating grounding tasks involving object links, "
        "where each task involves a limited number of steps and utilizes predefined action "
        "primitives from a robot skill library.\n\n"
        f"Robot Skill Library:\nActions available include:\n{library}.\n\n"
        "Requirements and Constraints:\n"
        "1. Tasks and actions must be tailored based on the current status of the link.\n"
        "2. Links may have different joint types: prismatic, revolute, static, etc.\n"
        "3. All actions must be sourced exclusively from the provided skill library.\n"
        "4. Provide the list of tasks and corresponding actions in JSON format.\n"
        "5. The generated actions should vary in sequence length, order, and semantics.\n"
        "6. Create tasks involving both single and multiple links where applicable.\n"
        "7. Do not assume or add components not explicitly specified.\n\n"
        f"Instruction:\nNow please generate the tasks and actions for the {category}'s link part "
        f"with the links {link_info}. You have generated tasks and actions in the previous as "
        f"following {previous}, please make sure the tasks and actions are different from the "
        "previous ones.\n\nPlease ONLY generate the tasks and actions in the valid json format."
    )


class SkillSelectionClient:
    """POSTs {category, links, history} and receives {tasks: [{task, actions}]}."""

    def __init__(
        self,
        endpoint: str = SKILL_ENDPOINT,
        timeout: float = REMOTE_TIMEOUT,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = client

    def select(
        self, category: str, links: list[LinkInfo], history: list[SkillTask] | None = None
    ) -> list[SkillTask]:
        request = SkillRequest(category=category, links=links, history=list(history or []))
        client = self._client or httpx.Client(timeout=self.timeout)
        try:
            response = client.post(self.endpoint, json=request.model_dump())
            response.raise_for_status()
            return SkillResponse.model_validate(response.json()).tasks
        except (httpx.RequestError, httpx.HTTPStatusError) as e:
            raise TransportError(f"Skill selection request failed: {e}") from e
        except (ValueError, ValidationError) as e:
            raise TransportError(f"Skill selection response violates the contract: {e}") from e
        finally:
            if self._client is None:
                client.close()


def default_semantic_name(link: str) -> str:
    """Link identifier as a readable part name: underscores to spaces, trailing digits dropped."""
    name = re.sub(r"[\s_]*\d+$", "", link.replace("_", " ")).strip()
    return name or link


@dataclass
class LabelDB:
    """Everything needed to name a link and choose its actions."""

    rules: SkillRuleTable = field(default_factory=SkillRuleTable.default)
    category: str = ""
    semantics: dict[str, str] = field(default_factory=dict)
    remote: SkillSelectionClient | None = None

    def semantic_name(self, link: str) -> str:
        return self.semantics.get(link) or default_semantic_name(link)

    def actions(self, link: str, joint_kind: str, state: str) -> list[str]:
        name = self.semantic_name(link)
        if self.remote is not None:
            try:
                tasks = self.remote.select(
                    self.category, [LinkInfo(name=name, joint=label_kind(joint_kind), state=state)]
                )
                actions = list(dict.fromkeys(a for task in tasks for a in task.actions))
                if actions:
                    return actions
            except TransportError as e:
                logger.warning("Remote skill selection failed, using rules", link=link, error=str(e))
        return select_actions(self.rules, self.category, name, joint_kind, state)
