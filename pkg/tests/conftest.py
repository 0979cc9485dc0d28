import numpy as np
import pytest

from tgqm import shapes
from tgqm.geom import Mesh
from tgqm.hand import Contact, Grasp, HandPose


@pytest.fixture(scope="session")
def unit_icosphere():
    v, t = shapes.icosphere_arrays(1.0, 3)
    return Mesh(vertices=v, triangles=t)


@pytest.fixture(scope="session")
def hammer():
    return shapes.hammer()


@pytest.fixture(scope="session")
def knife():
    return shapes.knife()
