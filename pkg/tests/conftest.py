"""Shared fixtures: bundled objects, default intrinsics and small inline URDFs."""

import pytest

from a3kit.camera_geometry import CameraIntrinsics
from a3kit.corpus import CorpusObject
from a3kit.fixtures import load_fixture
from a3kit.urdf_model import parse_urdf

BOX_HINGE_URDF = """<?xml version="1.0"?>
<robot name="box_hinge">
  <link name="base">
    <visual><geometry><box size="0.2 0.2 0.2"/></geometry></visual>
  </link>
  <link name="flap">
    <visual>
      <origin xyz="0.05 0 0"/>
      <geometry><box size="0.1 0.2 0.01"/></geometry>
    </visual>
  </link>
  <joint name="hinge" type="revolute">
    <parent link="base"/>
    <child link="flap"/>
    <origin xyz="0.1 0 0.1"/>
    <axis xyz="0 1 0"/>
    <limit lower="-1.0" upper="1.0"/>
  </joint>
</robot>
"""

SLIDER_URDF = """<?xml version="1.0"?>
<robot name="slider">
  <link name="rail">
    <visual><geometry><box size="0.6 0.05 0.05"/></geometry></visual>
  </link>
  <link name="carriage">
    <visual><geometry><box size="0.1 0.1 0.1"/></geometry></visual>
  </link>
  <joint name="slide" type="prismatic">
    <parent link="rail"/>
    <child link="carriage"/>
    <origin xyz="0 0 0.1"/>
    <axis xyz="1 0 0"/>
    <limit lower="-0.2" upper="0.2"/>
  </joint>
</robot>
"""


@pytest.fixture
def intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics()


@pytest.fixture
def box_hinge():
    return parse_urdf(BOX_HINGE_URDF)


@pytest.fixture
def slider():
    return parse_urdf(SLIDER_URDF)


@pytest.fixture
def door():
    return load_fixture("door")


@pytest.fixture
def drawer_cabinet():
    return load_fixture("drawer_cabinet")


@pytest.fixture
def door_object(door) -> CorpusObject:
    tree, fixture = door
    return CorpusObject(fixture.name, fixture.category, tree, fixture.semantics)
