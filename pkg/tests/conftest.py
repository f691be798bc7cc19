import numpy as np
import pytest

from consensus_opt import (
    PiecewiseControl,
    switched_system,
    validate_consensus_matrix,
)


def random_consensus_raw(rng, n, density=1.0, scale=1.0):
    """Raw Metzler zero-row-sum matrix with optional sparsity."""
    m = rng.uniform(0.0, scale, (n, n))
    if density < 1.0:
        m *= rng.random((n, n)) < density
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=1))
    return m


def random_consensus_matrix(rng, n, density=1.0, scale=1.0):
    return validate_consensus_matrix(random_consensus_raw(rng, n, density, scale))


def random_system(rng, n, r=2, density=1.0, scale=1.0):
    return switched_system(
        [random_consensus_raw(rng, n, density, scale) for _ in range(r)]
    )


def random_bang_bang(rng, r, horizon, max_segments=4):
    """Random vertex-valued piecewise-constant control."""
    k = int(rng.integers(1, max_segments + 1))
    cuts = np.sort(rng.uniform(0.05 * horizon, 0.95 * horizon, size=k - 1))
    bp = np.concatenate(([0.0], cuts, [horizon]))
    values = np.zeros((k, r))
    idx = int(rng.integers(r))
    for j in range(k):
        values[j, idx] = 1.0
        idx = (idx + 1 + int(rng.integers(r - 1))) % r
        values[j] /= values[j].sum()
    return PiecewiseControl(bp, values)


def random_simplex_control(rng, r, horizon, segments=4):
    bp = np.concatenate(
        ([0.0], np.sort(rng.uniform(0.1, 0.9, segments - 1)) * horizon, [horizon])
    )
    vals = rng.dirichlet(np.ones(r), size=segments)
    return PiecewiseControl(bp, vals)


def random_nonuniform_state(rng, n):
    x = rng.normal(size=n)
    while np.allclose(x, x.mean()):
        x = rng.normal(size=n)
    return x


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
