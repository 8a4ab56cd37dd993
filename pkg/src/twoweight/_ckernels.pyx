# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; same contracts as _pykernels."""
import numpy as np
from libc.math cimport sqrt, pow, floor



def dyadic_index(rel, int level):
    arr = np.ascontiguousarray(rel, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    cdef const double[:, :] x = arr
    cdef Py_ssize_t N = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t i, k
    out = np.empty((N, n), dtype=np.int64)
    cdef long long[:, :] o = out
    cdef double sc = pow(2.0, level)
    for i in range(N):
        for k in range(n):
            o[i, k] = <long long>floor(x[i, k] * sc)
    return out


def poisson_boxes(img, rel, w, centers, sides, double a, double b, inlo, inhi, exlo, exhi):
    cdef const double[:, :] Y = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[:, :] P = np.ascontiguousarray(rel, dtype=np.float64)
    cdef const double[:] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, :] C = np.ascontiguousarray(centers, dtype=np.float64)
    cdef const double[:] L = np.ascontiguousarray(sides, dtype=np.float64)
    cdef const double[:, :] il = np.ascontiguousarray(inlo, dtype=np.float64)
    cdef const double[:, :] ih = np.ascontiguousarray(inhi, dtype=np.float64)
    cdef const double[:, :] el = np.ascontiguousarray(exlo, dtype=np.float64)
    cdef const double[:, :] eh = np.ascontiguousarray(exhi, dtype=np.float64)
    cdef Py_ssize_t M = C.shape[0]
    cdef Py_ssize_t N = Y.shape[0]
    cdef Py_ssize_t n = C.shape[1]
    out = np.zeros(M, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t q, i, k
    cdef double acc, d2, t, s, sa
    cdef bint inside, excl
    if N == 0:
        return out
    for q in range(M):
        acc = 0.0
        s = L[q]
        sa = pow(s, a)
        for i in range(N):
            inside = True
            excl = True
            for k in range(n):
                if P[i, k] < il[q, k] or P[i, k] >= ih[q, k]:
                    inside = False
                    break
            if not inside:
                continue
            for k in range(n):
                if P[i, k] < el[q, k] or P[i, k] >= eh[q, k]:
                    excl = False
                    break
            if excl:
                continue
            d2 = 0.0
            for k in range(n):
                t = Y[i, k] - C[q, k]
                d2 += t * t
            acc += W[i] * sa / pow(s + sqrt(d2), b)
        o[q] = acc
    return out


cdef inline double _profile(double r, double s, double delta, double R, int kind):
    cdef double S
    if kind == 2:
        return pow(r, -s)
    if r >= delta and r <= R:
        return pow(r, -s)
    if kind == 0:
        if r > 0 and r < delta:
            return pow(delta, -s) * (1 + s - s * r / delta)
        S = R * (1 + s) / s
        if r > R and r < S:
            return pow(R, -s) * (1 + s - s * r / R)
    return 0.0


def profile(r, double s, double delta, double R, kind):
    cdef int kd = {"tangent": 0, "cutoff": 1, "none": 2}[kind]
    cdef const double[:] x = np.ascontiguousarray(np.ravel(r), dtype=np.float64)
    out = np.empty(x.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        if kd == 2 and x[i] == 0:
            o[i] = np.inf
        else:
            o[i] = _profile(x[i], s, delta, R, kd)
    return out.reshape(np.shape(r))


def riesz_matrix(Yin, Xin, int comp, double s, double delta, double R, kind):
    cdef int kd = {"tangent": 0, "cutoff": 1, "none": 2}[kind]
    cdef const double[:, :] Y = np.ascontiguousarray(Yin, dtype=np.float64)
    cdef const double[:, :] X = np.ascontiguousarray(Xin, dtype=np.float64)
    cdef Py_ssize_t M = Y.shape[0]
    cdef Py_ssize_t N = X.shape[0]
    cdef Py_ssize_t n = Y.shape[1]
    cdef Py_ssize_t i, j, k
    out = np.zeros((M, N), dtype=np.float64)
    cdef double[:, :] o = out
    cdef double d2, t, r
    for i in range(M):
        for j in range(N):
            d2 = 0.0
            for k in range(n):
                t = Y[i, k] - X[j, k]
                d2 += t * t
            r = sqrt(d2)
            if r == 0:
                if kd == 2:
                    raise ZeroDivisionError("untruncated kernel evaluated on the diagonal")
                continue
            o[i, j] = (Y[i, comp] - X[j, comp]) / r * _profile(r, s, delta, R, kd)
    return out
