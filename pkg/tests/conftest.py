import numpy as np
import pytest

from fiberpath import scenario as presets
from fiberpath.geometry import build_domain


@pytest.fixture(scope="session")
def two_holes_coarse():
    return presets.two_holes(target_edge=0.8)


@pytest.fixture(scope="session")
def rectangle_coarse():
    return presets.rectangle(target_edge=0.8)


@pytest.fixture(scope="session")
def square_domain():
    return build_domain({"outer": {"type": "rectangle", "width": 10.0, "height": 10.0},
                         "tags": {f"side{k}": {"loop": 0, "edge": k} for k in range(4)}})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
