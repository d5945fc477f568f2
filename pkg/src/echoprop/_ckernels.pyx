# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched iteration kernels; same surface as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, tanh, fabs, sqrt, M_PI

cnp.import_array()

cdef enum:
    CONSTANT = 0
    AFFINE = 1
    TANH_ESN = 2
    CIRCLE_SQUARE = 3
    ROTATION = 4
    DOUBLING = 5

cdef enum:
    CIRCLE = 1

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _wrap(double x) nogil:
    return x - floor(x + 0.5)


cdef inline double _scalar_step(int family, double c0, double c1, double c2,
                                double x, double u) nogil:
    cdef double v
    if family == CONSTANT:
        return c0
    if family == AFFINE:
        v = c0 * x + c1 * u
        if v > c2:
            return c2
        if v < -c2:
            return -c2
        return v
    if family == CIRCLE_SQUARE:
        if x < 0.0:
            v = x * (2.0 + x)
            if v < -0.5:
                v = v + 1.0
            return v
        return x * x
    if family == ROTATION:
        return _wrap(x + c0)
    # DOUBLING
    return _wrap((2.0 * (TWO_PI * x)) / TWO_PI)


cdef void _tanh_rows(const double* W, const double* Win, const double* x, const double* u,
                     const double* v, double* out, Py_ssize_t d, Py_ssize_t m) noexcept nogil:
    # out = tanh(W x + Win u), or tanh(W x + v) when the input term v is precomputed
    cdef Py_ssize_t i, j
    cdef double acc
    cdef const double* wi
    for i in range(d):
        wi = W + i * d
        if v != NULL:
            acc = v[i]
        else:
            acc = 0.0
            for j in range(m):
                acc = acc + Win[i * m + j] * u[j]
        for j in range(d):
            acc = acc + wi[j] * x[j]
        out[i] = tanh(acc)


cdef _params3(params):
    p = np.zeros(3)
    p[:len(params)] = params
    return p[0], p[1], p[2]


def _check_family(int family):
    if family < 0 or family > 5:
        raise ValueError(f"unknown family code {family}")


def wrap(x):
    return np.asarray(x) - np.floor(np.asarray(x) + 0.5)


def step(int family, params, W, Win, X, U):
    _check_family(family)
    X = np.ascontiguousarray(X, dtype=np.float64)
    U = np.ascontiguousarray(U, dtype=np.float64)
    return iterate(family, params, W, Win, X, U[:, None, :])


def iterate(int family, params, W, Win, X0, U):
    _check_family(family)
    cdef double[:, ::1] X = np.array(X0, dtype=np.float64, order="C", copy=True)
    cdef const double[:, :, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t B = X.shape[0], d = X.shape[1], n = Uv.shape[1], m
    cdef Py_ssize_t b, r, i
    cdef double c0, c1, c2
    cdef const double[:, ::1] Wv, Winv
    cdef double[::1] tmp
    if family == TANH_ESN:
        Wv = np.ascontiguousarray(W, dtype=np.float64)
        Winv = np.ascontiguousarray(Win, dtype=np.float64)
        tmp = np.empty(d)
        m = Uv.shape[2]
        with nogil:
            for b in range(B):
                for r in range(n):
                    _tanh_rows(&Wv[0, 0], &Winv[0, 0], &X[b, 0], &Uv[b, r, 0], NULL, &tmp[0], d, m)
                    for i in range(d):
                        X[b, i] = tmp[i]
        return np.asarray(X)
    c0, c1, c2 = _params3(params)
    with nogil:
        for b in range(B):
            for r in range(n):
                X[b, 0] = _scalar_step(family, c0, c1, c2, X[b, 0], Uv[b, r, 0])
    return np.asarray(X)


def trajectory(int family, params, W, Win, X0, U):
    _check_family(family)
    cdef const double[:, :, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    cdef Py_ssize_t B = X0.shape[0], d = X0.shape[1], n = Uv.shape[1]
    out_arr = np.empty((B, n + 1, d))
    out_arr[:, 0] = X0
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, r, m = Uv.shape[2]
    cdef double c0, c1, c2
    cdef const double[:, ::1] Wv, Winv
    if family == TANH_ESN:
        Wv = np.ascontiguousarray(W, dtype=np.float64)
        Winv = np.ascontiguousarray(Win, dtype=np.float64)
        with nogil:
            for b in range(B):
                for r in range(n):
                    _tanh_rows(&Wv[0, 0], &Winv[0, 0], &out[b, r, 0], &Uv[b, r, 0], NULL,
                               &out[b, r + 1, 0], d, m)
        return out_arr
    c0, c1, c2 = _params3(params)
    with nogil:
        for b in range(B):
            for r in range(n):
                out[b, r + 1, 0] = _scalar_step(family, c0, c1, c2, out[b, r, 0], Uv[b, r, 0])
    return out_arr


def staggered(int family, params, W, Win, X0, U, depths):
    _check_family(family)
    depths_arr = np.asarray(depths, dtype=np.int64)
    cdef const double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    cdef Py_ssize_t N = Uv.shape[0], S = len(depths_arr)
    cdef Py_ssize_t M = X0.shape[0], d = X0.shape[1]
    if S and (depths_arr.min() < 0 or depths_arr.max() > N):
        raise ValueError("depth outside the input rows")
    out_arr = np.empty((S, M, d))
    out_arr[:] = X0
    cdef double[:, :, ::1] out = out_arr
    cdef long long[::1] dep = depths_arr
    cdef Py_ssize_t s, m, r, i
    cdef double c0, c1, c2
    cdef const double[:, ::1] Wv, Vv
    cdef double[::1] tmp
    if family == TANH_ESN:
        Wv = np.ascontiguousarray(W, dtype=np.float64)
        Vv = np.ascontiguousarray(np.asarray(Uv) @ np.asarray(Win, dtype=np.float64).T)
        tmp = np.empty(d)
        with nogil:
            for s in range(S):
                for m in range(M):
                    for r in range(N - dep[s], N):
                        _tanh_rows(&Wv[0, 0], NULL, &out[s, m, 0], NULL, &Vv[r, 0], &tmp[0], d, 0)
                        for i in range(d):
                            out[s, m, i] = tmp[i]
        return out_arr
    c0, c1, c2 = _params3(params)
    with nogil:
        for s in range(S):
            for m in range(M):
                for r in range(N - dep[s], N):
                    out[s, m, 0] = _scalar_step(family, c0, c1, c2, out[s, m, 0], Uv[r, 0])
    return out_arr


def distances(int metric, X, Y):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t K = Xv.shape[0], d = Xv.shape[1], k, i
    out_arr = np.empty(K)
    cdef double[::1] out = out_arr
    cdef double acc, delta
    with nogil:
        for k in range(K):
            if metric == CIRCLE:
                delta = fabs(Xv[k, 0] - Yv[k, 0])
                delta = delta - floor(delta)
                out[k] = delta if delta < 1.0 - delta else 1.0 - delta
            elif d == 1:
                out[k] = fabs(Xv[k, 0] - Yv[k, 0])
            else:
                acc = 0.0
                for i in range(d):
                    acc = acc + (Xv[k, i] - Yv[k, i]) * (Xv[k, i] - Yv[k, i])
                out[k] = sqrt(acc)
    return out_arr


def diameter(int metric, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t M = Xv.shape[0], d = Xv.shape[1], i, j, k
    cdef double best = 0.0, acc, diff
    cdef Py_ssize_t bi = 0, bj = 0
    if M < 2:
        return 0.0, 0, 0
    if metric == CIRCLE:
        return _circle_diameter(np.asarray(Xv[:, 0]))
    if d == 1:
        with nogil:
            for i in range(M):
                if Xv[i, 0] < Xv[bi, 0]:
                    bi = i
                if Xv[i, 0] > Xv[bj, 0]:
                    bj = i
        return float(Xv[bj, 0] - Xv[bi, 0]), int(bi), int(bj)
    with nogil:
        for i in range(M - 1):
            for j in range(i + 1, M):
                acc = 0.0
                for k in range(d):
                    diff = Xv[i, k] - Xv[j, k]
                    acc = acc + diff * diff
                if acc > best:
                    best, bi, bj = acc, i, j
    return float(sqrt(best)), int(bi), int(bj)


def _circle_diameter(x):
    order_arr = np.argsort(x, kind="stable")
    cdef const double[::1] xs = np.ascontiguousarray(x[order_arr])
    cdef long long[::1] order = order_arr.astype(np.int64)
    cdef Py_ssize_t M = xs.shape[0], k, lo, hi, mid, off, c
    cdef double q, delta, dist, best = -1.0
    cdef Py_ssize_t bi = 0, bj = 0
    with nogil:
        for k in range(M):
            q = _wrap(xs[k] + 0.5)
            lo = 0
            hi = M
            while lo < hi:
                mid = (lo + hi) // 2
                if xs[mid] < q:
                    lo = mid + 1
                else:
                    hi = mid
            for off in range(-1, 1):
                c = (lo + off + M) % M
                delta = fabs(xs[k] - xs[c])
                delta = delta - floor(delta)
                dist = delta if delta < 1.0 - delta else 1.0 - delta
                if dist > best:
                    best, bi, bj = dist, order[k], order[c]
    return float(best), int(bi), int(bj)
