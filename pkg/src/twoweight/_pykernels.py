"""Numpy implementations of the hot loops (fallback for the compiled core).

Powers go through libm pow and sums run left to right so that results match
the compiled loops bit for bit.
"""
import math

import numpy as np

_libm_pow = np.frompyfunc(math.pow, 2, 1)


def _pow(x, y):
    return np.asarray(_libm_pow(x, y), dtype=float)


def _rowsum(v):
    """Sequential sum along the last axis."""
    if v.shape[-1] == 0:
        return np.zeros(v.shape[:-1])
    return np.cumsum(v, axis=-1)[..., -1]


def dyadic_index(rel, level):
    return np.floor(np.asarray(rel, dtype=float) * (2.0**level)).astype(np.int64)


def poisson_boxes(img, rel, w, centers, sides, a, b, inlo, inhi, exlo, exhi):
    """For each cube q: sum_i w_i side_q^a / (side_q + |img_i - c_q|)^b over atoms
    whose preimage lies in [inlo_q, inhi_q) and outside [exlo_q, exhi_q)."""
    img = np.asarray(img, float)
    rel = np.asarray(rel, float)
    if img.shape[0] == 0 or centers.shape[0] == 0:
        return np.zeros(centers.shape[0])
    dist = np.sqrt(_rowsum((img[None, :, :] - centers[:, None, :]) ** 2))
    keep = np.all((rel[None] >= inlo[:, None]) & (rel[None] < inhi[:, None]), axis=2)
    keep &= ~np.all((rel[None] >= exlo[:, None]) & (rel[None] < exhi[:, None]), axis=2)
    s = sides[:, None]
    val = np.where(keep, w[None, :] * _pow(s, a) / _pow(s + dist, b), 0.0)
    return _rowsum(val)


def profile(r, s, delta, R, kind):
    """Radial profile psi(r) for truncation kind 'tangent', 'cutoff' or 'none'."""
    r = np.asarray(r, float)
    out = np.zeros_like(r)
    if kind == "none":
        with np.errstate(divide="ignore"):
            return np.where(r > 0, _pow(np.where(r > 0, r, 1.0), -s), np.inf)
    mid = (r >= delta) & (r <= R)
    out[mid] = _pow(r[mid], -s)
    if kind == "tangent":
        lo = (r > 0) & (r < delta)
        out[lo] = math.pow(delta, -s) * (1 + s - s * r[lo] / delta)
        S = R * (1 + s) / s
        hi = (r > R) & (r < S)
        out[hi] = math.pow(R, -s) * (1 + s - s * r[hi] / R)
    return out


def riesz_matrix(Y, X, comp, s, delta, R, kind):
    """Matrix K(y_i, x_j) = (w_comp/|w|) psi(|w|), w = y - x."""
    W = Y[:, None, :] - X[None, :, :]
    r = np.sqrt(_rowsum(W**2))
    psi = profile(r, s, delta, R, kind)
    with np.errstate(invalid="ignore", divide="ignore"):
        omega = np.where(r > 0, W[:, :, comp] / np.where(r > 0, r, 1.0), 0.0)
    if kind == "none" and np.any(r == 0):
        raise ZeroDivisionError("untruncated kernel evaluated on the diagonal")
    return omega * psi
