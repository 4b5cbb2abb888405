# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``py_backend``.

Every kernel reproduces the numpy backend expression-for-expression (same
operation order, reciprocal multiplications, no FMA contraction thanks to
-ffp-contract=off) so results are bitwise identical. Keep the two files in
sync; the cross-backend equality test enforces it.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "compiled"


cdef inline double _soft(double u, double thr) nogil:
    # sign(u) * max(|u| - thr, 0) with numpy's sign(0) == 0 convention.
    cdef double a = fabs(u) - thr
    if a < 0.0:
        a = 0.0
    if u > 0.0:
        return a
    elif u < 0.0:
        return -a
    else:
        return u * a  # preserves numpy's signed-zero behaviour


cdef cnp.ndarray[double, ndim=1] _f64(object v):
    return np.ascontiguousarray(v, dtype=np.float64)


def soft_threshold_vec(v, tau):
    """sign(v) * max(|v| - tau, 0), elementwise; tau may be scalar or array."""
    cdef cnp.ndarray[double, ndim=1] vv = _f64(v)
    cdef Py_ssize_t n = vv.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] tt
    cdef double ts
    cdef Py_ssize_t i
    if np.ndim(tau) == 0:
        ts = float(tau)
        for i in range(n):
            out[i] = _soft(vv[i], ts)
    else:
        tt = _f64(tau)
        for i in range(n):
            out[i] = _soft(vv[i], tt[i])
    return out


def ssf_direction(x, atr, c, mu):
    """Separable-surrogate step minus x: soft(x - atr/c, mu/(2c)) - x."""
    cdef cnp.ndarray[double, ndim=1] xx = _f64(x)
    cdef cnp.ndarray[double, ndim=1] aa = _f64(atr)
    cdef Py_ssize_t n = xx.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double inv = 1.0 / <double> c
    cdef double thr = 0.5 * <double> mu * inv
    cdef double u
    cdef Py_ssize_t i
    for i in range(n):
        u = xx[i] - aa[i] * inv
        out[i] = _soft(u, thr) - xx[i]
    return out


def pcd_direction(x, atr, col_norms_sq, mu):
    """Parallel-coordinate-descent direction; returns (d, n_skipped)."""
    cdef cnp.ndarray[double, ndim=1] xx = _f64(x)
    cdef cnp.ndarray[double, ndim=1] aa = _f64(atr)
    cdef cnp.ndarray[double, ndim=1] cn = _f64(col_norms_sq)
    cdef Py_ssize_t n = xx.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double mus = <double> mu
    cdef double inv, u
    cdef Py_ssize_t i, skipped = 0
    for i in range(n):
        if cn[i] > 0.0:
            inv = 1.0 / cn[i]
            u = xx[i] - aa[i] * inv
            out[i] = _soft(u, 0.5 * mus * inv) - xx[i]
        else:
            out[i] = 0.0
            skipped += 1
    return out, skipped


def smooth_abs(x, eps):
    """sqrt(x^2 + eps^2) - eps elementwise."""
    cdef cnp.ndarray[double, ndim=1] xx = _f64(x)
    cdef Py_ssize_t n = xx.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double e = <double> eps
    cdef double e2 = e * e
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = sqrt(xx[i] * xx[i] + e2) - e
    return out


def smooth_abs_grad(x, eps):
    """x / sqrt(x^2 + eps^2); sign(x) when eps == 0."""
    cdef cnp.ndarray[double, ndim=1] xx = _f64(x)
    cdef Py_ssize_t n = xx.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double e = <double> eps
    cdef double e2 = e * e
    cdef Py_ssize_t i
    if e == 0.0:
        for i in range(n):
            out[i] = (xx[i] > 0.0) - (xx[i] < 0.0)
    else:
        for i in range(n):
            out[i] = xx[i] / sqrt(xx[i] * xx[i] + e2)
    return out


def smooth_abs_hess(x, eps):
    """eps^2 / (x^2 + eps^2)^(3/2); zeros when eps == 0."""
    cdef cnp.ndarray[double, ndim=1] xx = _f64(x)
    cdef Py_ssize_t n = xx.shape[0]
    cdef cnp.ndarray[double, ndim=1] out
    cdef double e = <double> eps
    cdef double e2 = e * e
    cdef double t
    cdef Py_ssize_t i
    if e == 0.0:
        return np.zeros(n, dtype=np.float64)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        t = xx[i] * xx[i] + e2
        out[i] = e2 / (t * sqrt(t))
    return out
