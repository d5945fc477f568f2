"""Backend selection for the batched iteration kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``ECHOPROP_PURE_PYTHON=1`` to force the fallback.

The dense tanh reservoir always runs on the numpy kernels: batched BLAS
products and numpy's vectorized tanh beat the compiled per-row loop there
(see ``benchmarks/bench_kernels.py``). The scalar families use the
compiled loops.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ECHOPROP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

CONSTANT, AFFINE, TANH_ESN, CIRCLE_SQUARE, ROTATION, DOUBLING = range(6)
EUCLIDEAN, CIRCLE = 0, 1

NUMPY_FAMILIES = frozenset({TANH_ESN})


def _route(name):
    fast, fallback = getattr(_impl, name), getattr(_kernels_py, name)
    if fast is fallback:
        return fast

    def call(family, *args):
        return (fallback if family in NUMPY_FAMILIES else fast)(family, *args)

    call.__name__ = name
    call.__doc__ = fallback.__doc__
    return call


step = _route("step")
iterate = _route("iterate")
trajectory = _route("trajectory")
staggered = _route("staggered")
distances = _impl.distances
diameter = _impl.diameter
wrap = _kernels_py.wrap


def backends():
    """Available kernel modules by name, for benchmarks and cross-checks."""
    out = {"python": _kernels_py}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
