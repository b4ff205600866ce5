import math

import numpy as np
import pytest

from subaudit.catalog import sphere_chart
from subaudit.geometry import Chart


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def euclidean(dim=3):
    coords = [f"x{i}" for i in range(1, dim + 1)]
    return Chart.from_strings(coords, ["1"] * dim, [(-1.0, 1.0)] * dim, f"E{dim}")


def polar():
    return Chart.from_strings(["r", "theta"], ["1", "r^2"], [(0.5, 3.0), (-math.pi, math.pi)], "polar")


def hyperbolic():
    return Chart.from_strings(["t", "x"], ["1", "exp(2*t)"], [(-2.0, 2.0), (-1.0, 1.0)], "H2")


def unit_sphere():
    return sphere_chart(2, 1.0)
