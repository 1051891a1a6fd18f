import math

import numpy as np
import pytest
from hypothesis import settings

from doppdrive.simulator import EgoSegment, NoiseSpec, ObjectSpec, ScenarioSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def straight_scene(objects, *, ego_speed=20.0, duration=2.0, fps=20.0, seed=0, noise=None, static=0.0, **kw):
    """Noise-free straight-driving scene unless ``noise`` is given."""
    return ScenarioSpec(
        duration=duration,
        fps=fps,
        ego_profile=(EgoSegment(1e9, ego_speed),),
        objects=tuple(objects),
        noise=NoiseSpec.none() if noise is None else noise,
        seed=seed,
        static_points_per_frame=static,
        **kw,
    )


def car(x, y, speed, heading_deg=0.0, ppf=8.0, cls="car"):
    return ObjectSpec(cls, (x, y, -0.5), speed, math.radians(heading_deg), points_per_frame=ppf)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
