"""Pure numpy implementation of the batched iteration kernels.

Mirrors ``_ckernels.pyx`` function for function; ``echoprop.kernels`` picks
whichever is importable. All arrays are float64 and C-contiguous.

Family codes::

    0 constant        params = [c]
    1 affine          params = [a, b, radius]
    2 tanh_esn        W (d, d), Win (d, m)
    3 circle_square   no params
    4 rotation        params = [alpha]
    5 doubling        no params

Circle states live in the centered chart [-1/2, 1/2).
"""

import numpy as np

CONSTANT, AFFINE, TANH_ESN, CIRCLE_SQUARE, ROTATION, DOUBLING = range(6)
EUCLIDEAN, CIRCLE = 0, 1

TWO_PI = 2.0 * np.pi


def wrap(x):
    return x - np.floor(x + 0.5)


def step(family, params, W, Win, X, U):
    """One application of the state map to a batch ``X`` (B, d) with inputs ``U`` (B, m)."""
    if family == CONSTANT:
        return np.full_like(X, params[0])
    if family == AFFINE:
        a, b, radius = params[0], params[1], params[2]
        return np.clip(a * X + b * U[:, :1], -radius, radius)
    if family == TANH_ESN:
        return np.tanh(X @ W.T + U @ Win.T)
    if family == CIRCLE_SQUARE:
        neg = X < 0.0
        out = np.where(neg, X * (2.0 + X), X * X)
        return np.where(neg & (out < -0.5), out + 1.0, out)
    if family == ROTATION:
        return wrap(X + params[0])
    if family == DOUBLING:
        # through radians: exact doubling of a binary fraction collapses every orbit onto 0
        return wrap((2.0 * (TWO_PI * X)) / TWO_PI)
    raise ValueError(f"unknown family code {family}")


def iterate(family, params, W, Win, X0, U):
    """Final states after feeding each batch row its own inputs ``U`` (B, n, m)."""
    X = np.array(X0, dtype=np.float64, copy=True)
    for r in range(U.shape[1]):
        X = step(family, params, W, Win, X, U[:, r, :])
    return X


def trajectory(family, params, W, Win, X0, U):
    """Like :func:`iterate` but returns all states, shape (B, n + 1, d)."""
    B, n = U.shape[0], U.shape[1]
    out = np.empty((B, n + 1, X0.shape[1]))
    out[:, 0] = X0
    for r in range(n):
        out[:, r + 1] = step(family, params, W, Win, out[:, r], U[:, r, :])
    return out


def staggered(family, params, W, Win, X0, U, depths):
    """Pullback images from ``X0`` (M, d) over the last ``depths[s]`` rows of a shared ``U`` (N, m).

    Returns (S, M, d). Row ``N - 1`` of ``U`` is the input at time 0.
    """
    depths = np.asarray(depths, dtype=np.int64)
    N = U.shape[0]
    S, M, d = len(depths), X0.shape[0], X0.shape[1]
    if S and (depths.min() < 0 or depths.max() > N):
        raise ValueError("depth outside the input rows")
    order = np.argsort(-depths, kind="stable")
    sorted_depths = depths[order]
    X = np.broadcast_to(X0, (S, M, d)).copy()
    active = 0
    for r in range(N):
        while active < S and N - sorted_depths[active] <= r:
            active += 1
        if active == 0:
            continue
        flat = X[:active].reshape(active * M, d)
        Ur = np.broadcast_to(U[r], (active * M, U.shape[1]))
        X[:active] = step(family, params, W, Win, flat, Ur).reshape(active, M, d)
    out = np.empty_like(X)
    out[order] = X
    return out


def distances(metric, X, Y):
    """Row-wise metric between (K, d) arrays."""
    if metric == CIRCLE:
        delta = np.abs(X[:, 0] - Y[:, 0])
        delta = delta - np.floor(delta)
        return np.minimum(delta, 1.0 - delta)
    if X.shape[1] == 1:
        return np.abs(X[:, 0] - Y[:, 0])
    return np.sqrt(np.sum((X - Y) ** 2, axis=1))


def diameter(metric, X):
    """Exact diameter of the point set ``X`` (M, d); returns (value, i, j)."""
    M = X.shape[0]
    if M < 2:
        return 0.0, 0, 0
    if metric == CIRCLE:
        return _circle_diameter(X[:, 0])
    if X.shape[1] == 1:
        i, j = int(np.argmin(X[:, 0])), int(np.argmax(X[:, 0]))
        return float(X[j, 0] - X[i, 0]), i, j
    best, bi, bj = 0.0, 0, 0
    for i in range(M - 1):
        sq = np.sum((X[i + 1:] - X[i]) ** 2, axis=1)
        k = int(np.argmax(sq))
        if sq[k] > best:
            best, bi, bj = float(sq[k]), i, i + 1 + k
    return float(np.sqrt(best)), bi, bj


def _circle_diameter(x):
    order = np.argsort(x, kind="stable")
    xs = x[order]
    M = len(xs)
    antipode = wrap(xs + 0.5)
    pos = np.searchsorted(xs, antipode)
    cand = np.stack([(pos - 1) % M, pos % M], axis=1)
    delta = np.abs(xs[:, None] - xs[cand])
    delta = delta - np.floor(delta)
    dist = np.minimum(delta, 1.0 - delta)
    # row-major argmax keeps tie-breaking identical to the compiled kernel
    k, off = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return float(dist[k, off]), int(order[k]), int(order[cand[k, off]])
