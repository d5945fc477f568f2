"""The compiled kernels and the numpy fallback must agree."""

import numpy as np
import pytest

from echoprop import kernels
from echoprop.systems import DEFAULT_CATALOG, catalog_get

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def _states(spec, rng, n):
    return spec.sample_states(rng, n)


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS


@needs_both
@pytest.mark.parametrize("name", DEFAULT_CATALOG)
def test_iterate_trajectory_staggered_agree(name, rng):
    spec = catalog_get(name)
    args = spec.kernel_args()
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    X0 = _states(spec, rng, 9)
    U = rng.uniform(-1, 1, size=(9, 30, spec.input_dim))
    tol = 1e-13 if spec.family == "tanh_esn" else 0.0
    assert np.max(np.abs(py.iterate(*args, X0, U) - cy.iterate(*args, X0, U))) <= tol
    assert np.max(np.abs(py.trajectory(*args, X0, U) - cy.trajectory(*args, X0, U))) <= tol
    shared = rng.uniform(-1, 1, size=(25, spec.input_dim))
    depths = [0, 1, 7, 25, 3]
    a = py.staggered(*args, X0, shared, depths)
    b = cy.staggered(*args, X0, shared, depths)
    assert a.shape == (5, 9, spec.state_dim)
    assert np.max(np.abs(a - b)) <= tol


@needs_both
@pytest.mark.parametrize("metric,dim", [(kernels.EUCLIDEAN, 1), (kernels.EUCLIDEAN, 5), (kernels.CIRCLE, 1)])
def test_distances_and_diameter_agree(metric, dim, rng):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    X = rng.uniform(-0.5, 0.5, size=(200, dim))
    Y = rng.uniform(-0.5, 0.5, size=(200, dim))
    assert np.allclose(py.distances(metric, X, Y), cy.distances(metric, X, Y), atol=1e-15, rtol=0)
    assert py.diameter(metric, X) == cy.diameter(metric, X)


@pytest.mark.parametrize("impl", sorted(BACKENDS))
def test_circle_diameter_matches_brute_force(impl, rng):
    mod = BACKENDS[impl]
    for _ in range(20):
        x = rng.uniform(-0.5, 0.5, size=(rng.integers(2, 40), 1))
        d = np.abs(x[:, None, 0] - x[None, :, 0])
        brute = np.max(np.minimum(d, 1 - d))
        value, i, j = mod.diameter(kernels.CIRCLE, x)
        assert value == pytest.approx(brute, abs=1e-15)
        assert mod.distances(kernels.CIRCLE, x[[i]], x[[j]])[0] == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("impl", sorted(BACKENDS))
def test_staggered_matches_separate_runs(impl, rng):
    mod = BACKENDS[impl]
    spec = catalog_get("affine(0.5,1)")
    args = spec.kernel_args()
    X0 = _states(spec, rng, 4)
    U = rng.uniform(-1, 1, size=(12, 1))
    out = mod.staggered(*args, X0, U, [12, 5])
    for s, n in enumerate([12, 5]):
        ref = mod.iterate(*args, X0, np.broadcast_to(U[12 - n:], (4, n, 1)).copy())
        assert np.array_equal(out[s], ref)


def test_unknown_family_rejected():
    for mod in BACKENDS.values():
        with pytest.raises(ValueError):
            mod.iterate(9, [0.0], None, None, np.zeros((1, 1)), np.zeros((1, 1, 1)))
