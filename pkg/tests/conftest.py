import numpy as np
import pytest

from geomonge.kantorovich import DiscreteMeasure, TransportPlan
from geomonge.space import build_counterexample_space, build_segment, from_weighted_edges


@pytest.fixture
def seg5():
    return build_segment(5, 1.0)


@pytest.fixture
def seg20():
    return build_segment(20, 1.0)


@pytest.fixture(scope="session")
def cx_space():
    return build_counterexample_space(64)


@pytest.fixture
def y_space():
    # center 0, leaves 1..3 at distance 1
    return from_weighted_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])


def measure(n, atoms):
    return DiscreteMeasure.from_atoms(n, atoms)


def plan(n, entries):
    return TransportPlan(n, entries)
