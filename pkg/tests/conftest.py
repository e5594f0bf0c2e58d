import os

import pytest

from manyworlds.events import U, VU
from manyworlds.kmedoids import example_line_dataset

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def line_dataset():
    return example_line_dataset()


@pytest.fixture
def kmedoids_src():
    with open(os.path.join(FIXTURES, "kmedoids.prog")) as fh:
        return fh.read()


@pytest.fixture
def kmeans_src():
    with open(os.path.join(FIXTURES, "kmeans.prog")) as fh:
        return fh.read()


@pytest.fixture
def graphflow_src():
    with open(os.path.join(FIXTURES, "graphflow.prog")) as fh:
        return fh.read()


def values_close(a, b, tol=1e-9):
    """Equality over extended values: undefined matches undefined."""
    if a is U or a is VU or b is U or b is VU:
        return (a is U or a is VU) and (b is U or b is VU)
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(values_close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, bool) or isinstance(b, bool):
        return bool(a) == bool(b)
    return abs(a - b) <= tol
