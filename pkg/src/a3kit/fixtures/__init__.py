"""Bundled desk-scale articulated objects with analytically known annotations.

Every `<name>.urdf` ships with a `<name>.json` sidecar holding the object category,
the link semantics and, per movable part, the expected axis line (world frame at
the zero configuration) and box (center in the link frame, half-extents ordered
long edge, short edge, along the axis). Objects are z-up with their front at +x.
"""

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel

from ..errors import FixtureNotFoundError
from ..urdf_model import KinematicTree, load_urdf

FIXTURE_DIR = Path(__file__).resolve().parent
FIXTURE_NAMES = (
    "door",
    "drawer_cabinet",
    "bottle_cap",
    "laptop",
    "faucet",
    "scissors",
    "microwave",
    "hidden_drawer",
    "stove_knob",
)

Vector = tuple[float, float, float]


class ExpectedPart(BaseModel):
    link: str
    joint_kind: Literal["revolute", "prismatic"]
    axis_point: Vector
    axis_direction: Vector
    box_center_local: Vector
    half_extents: Vector


class FixtureObject(BaseModel):
    name: str
    urdf_path: Path
    category: str
    semantics: dict[str, str] = {}
    parts: list[ExpectedPart] = []

    def part(self, link: str) -> ExpectedPart:
        for part in self.parts:
            if part.link == link:
                return part
        raise FixtureNotFoundError(f"Fixture '{self.name}' has no expectations for link '{link}'")


def load_fixture(name: str) -> tuple[KinematicTree, FixtureObject]:
    if name not in FIXTURE_NAMES:
        raise FixtureNotFoundError(f"Unknown fixture '{name}'; available: {', '.join(FIXTURE_NAMES)}")
    urdf_path = FIXTURE_DIR / f"{name}.urdf"
    sidecar = json.loads((FIXTURE_DIR / f"{name}.json").read_text(encoding="utf-8"))
    fixture = FixtureObject(name=name, urdf_path=urdf_path, **sidecar)
    return load_urdf(urdf_path), fixture
