import numpy as np
import pytest

from pcrpnhpp import (
    CovariateField,
    GridPartition,
    Hyperparams,
    PointPattern,
    Region,
    make_rng,
    prepare_fit_data,
)


@pytest.fixture
def unit_region():
    return Region(0.0, 4.0, 0.0, 4.0)


@pytest.fixture
def grid44(unit_region):
    return GridPartition.make(unit_region, 4, 4)


@pytest.fixture
def small_data(grid44):
    """16 unit boxes, 2 covariates, a modest seeded pattern."""
    rng = make_rng(11)
    values = rng.standard_normal((grid44.n, 2))
    cov = CovariateField(grid=grid44, values=values)
    lam = np.where(np.arange(grid44.n) < 8, 1.0, 6.0) * np.exp(values @ [0.4, 0.0])
    counts = rng.poisson(lam)
    pts = []
    for i, c in enumerate(counts):
        ix, iy = i % 4, i // 4
        u = rng.random((c, 2))
        pts.append(np.column_stack([ix + u[:, 0], iy + u[:, 1]]))
    pattern = PointPattern(np.vstack(pts) if pts else np.empty((0, 2)))
    return prepare_fit_data(pattern, grid44, cov)


@pytest.fixture
def default_hyper():
    return Hyperparams()
