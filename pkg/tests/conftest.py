import numpy as np
import pytest

from flowforge import Direction, GraphField, PeriodicGrid

TWO_PI = 2.0 * np.pi


@pytest.fixture
def grid256():
    return PeriodicGrid((TWO_PI,), (256,))


@pytest.fixture
def grid2d():
    return PeriodicGrid((TWO_PI, TWO_PI), (64, 64))


@pytest.fixture
def vertical():
    return Direction.vertical(1)


def sine_field(grid, amplitude=1.0, wavenumber=1):
    x = grid.axis(0)
    k = 2.0 * np.pi * wavenumber / grid.period[0]
    return GraphField(grid, amplitude * np.sin(k * x))


def loglog_slope(xs, ys):
    return float(np.polyfit(np.log(np.asarray(xs)), np.log(np.asarray(ys)), 1)[0])
