import math

import numpy as np
import pytest

from sonarsim.scene import Material, Scene, TriMesh, tessellate_primitive
from sonarsim.sonogram import NoiseParams, SonarConfig


def wall_mesh(distance, half_width=50.0, half_height=50.0):
    """Square wall in the plane x = distance, facing the origin."""
    a = [distance, -half_width, -half_height]
    b = [distance, half_width, -half_height]
    c = [distance, half_width, half_height]
    d = [distance, -half_width, half_height]
    return TriMesh([[a, c, b], [a, d, c]])


def make_scene(*meshes, reflectivity=1.0, roughness=0.0):
    scene = Scene(materials=[Material(reflectivity, roughness)])
    for m in meshes:
        scene.add(m)
    return scene


def quiet_config(**kw):
    """Deterministic config with every optional effect off unless asked for."""
    base = dict(noise=NoiseParams(0.0, 0.0), secondary=False, attenuation=False, roughness=False)
    base.update(kw)
    return SonarConfig(**base)


@pytest.fixture
def wall_scene():
    return make_scene(wall_mesh(10.0))


@pytest.fixture
def cone_scene():
    cone = tessellate_primitive("cone", {"radius": 1.5, "height": 3.0}, 32)
    # lay the cone on its side pointing away from the sonar so it spans a range interval
    rot = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    return make_scene(cone.transformed(rot, [6.0, 0.0, 0.0]))


@pytest.fixture
def small_fls():
    return quiet_config(n_beams=32, n_bins=100, fov_azimuth=math.radians(60), fov_elevation=math.radians(20),
                        range_min=1.0, range_max=21.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
