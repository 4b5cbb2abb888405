"""Numpy reference implementation of the coordinatewise kernels.

These are the hot non-BLAS loops of the package: the soft-threshold prox,
the PCD/SSF direction assembly, and the smoothed-absolute-value maps used
by the inner Newton solves. The compiled backend in ``_fast.pyx`` mirrors
each expression exactly (same operation order, multiplication by a
precomputed reciprocal instead of division where noted) so the two
backends agree bitwise and solver trajectories do not depend on which one
is loaded.

All kernels are elementwise and return new float64 arrays; reductions are
left to ``np.sum`` at call sites so both backends share numpy's pairwise
summation.
"""

import numpy as np

BACKEND = "python"


def _as_f64(v):
    return np.ascontiguousarray(v, dtype=np.float64)


def soft_threshold_vec(v, tau):
    """sign(v) * max(|v| - tau, 0), elementwise; tau may be scalar or array."""
    v = _as_f64(v)
    if np.ndim(tau) == 0:
        tau = float(tau)
    else:
        tau = _as_f64(tau)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def ssf_direction(x, atr, c, mu):
    """Separable-surrogate step minus x: soft(x - atr/c, mu/(2c)) - x.

    ``atr`` is A^T(Ax - b). Implemented as multiplication by 1/c.
    """
    x = _as_f64(x)
    atr = _as_f64(atr)
    inv = 1.0 / float(c)
    u = x - atr * inv
    thr = 0.5 * float(mu) * inv
    return np.sign(u) * np.maximum(np.abs(u) - thr, 0.0) - x


def pcd_direction(x, atr, col_norms_sq, mu):
    """Parallel-coordinate-descent direction.

    Per coordinate j with column norm squared cn_j > 0:
        d_j = soft(x_j - atr_j / cn_j, mu / (2 cn_j)) - x_j
    Coordinates with cn_j <= 0 get d_j = 0 (skipped).

    Returns (d, n_skipped).
    """
    x = _as_f64(x)
    atr = _as_f64(atr)
    cn = _as_f64(col_norms_sq)
    ok = cn > 0.0
    inv = np.zeros_like(cn)
    inv[ok] = 1.0 / cn[ok]
    u = x - atr * inv
    thr = 0.5 * float(mu) * inv
    d = np.sign(u) * np.maximum(np.abs(u) - thr, 0.0) - x
    d[~ok] = 0.0
    return d, int(np.count_nonzero(~ok))


def smooth_abs(x, eps):
    """sqrt(x^2 + eps^2) - eps elementwise (exact |x| when eps == 0)."""
    x = _as_f64(x)
    eps = float(eps)
    return np.sqrt(x * x + eps * eps) - eps


def smooth_abs_grad(x, eps):
    """d/dx of smooth_abs: x / sqrt(x^2 + eps^2); sign(x) when eps == 0."""
    x = _as_f64(x)
    eps = float(eps)
    if eps == 0.0:
        return np.sign(x)
    return x / np.sqrt(x * x + eps * eps)


def smooth_abs_hess(x, eps):
    """Second derivative of smooth_abs: eps^2 / (x^2 + eps^2)^(3/2)."""
    x = _as_f64(x)
    eps = float(eps)
    if eps == 0.0:
        return np.zeros_like(x)
    e2 = eps * eps
    t = x * x + e2
    return e2 / (t * np.sqrt(t))
