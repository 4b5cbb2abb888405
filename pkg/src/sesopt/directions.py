"""Per-iteration search directions fed into the subspace frame.

Every function returns a full-space vector (never normalized here; the
frame conditioning owns scaling). PCD and SSF consume exactly one adjoint
application when given the residual, or zero when the caller already has
A^T r in hand.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .core import CompositeObjective, NewtonUnavailableError

__all__ = [
    "DirectionKind",
    "OrthState",
    "dir_gradient",
    "dir_pcd",
    "dir_ssf",
    "dir_orth_update",
    "dir_newton",
]


class DirectionKind(str, Enum):
    GRADIENT = "gradient"
    PCD = "pcd"
    SSF = "ssf"
    ORTH_WEIGHTED_GRAD = "orth_weighted_grad"
    ORTH_TOTAL_STEP = "orth_total_step"
    NEWTON = "newton"
    TN = "tn"


def dir_gradient(g):
    """Steepest descent direction -g."""
    return -np.asarray(g, dtype=np.float64)


def dir_pcd(composite, x, r, atr=None):
    """Parallel-coordinate-descent direction.

    Coordinate j moves to the exact minimizer of the composite objective
    along e_j (closed form through the soft threshold):

        d_j = soft(x_j - (a_j . r)/||a_j||^2, mu/(2 ||a_j||^2)) - x_j

    ``r`` is the current residual A x - b. Passing a precomputed
    ``atr = A^T r`` makes the call free of operator applications; otherwise
    it costs exactly one adjoint. Zero-norm columns are skipped (d_j = 0)
    with a warning.
    """
    if not isinstance(composite, CompositeObjective):
        raise TypeError("dir_pcd needs a CompositeObjective")
    cn = composite.op.column_norms_sq()
    if cn is None:
        raise ValueError("operator does not expose column norms")
    if atr is None:
        atr = composite.op.adjoint(r)
    d, skipped = _kernels.pcd_direction(x, atr, cn, composite.mu)
    if skipped:
        warnings.warn(f"pcd: skipped {skipped} zero-norm columns", RuntimeWarning)
    return d


def dir_ssf(composite, x, r, c=None, atr=None):
    """Separable-surrogate (SSF) direction d = prox step - x.

    Minimizes the quadratic majorizer with curvature c >= sigma_max(A)^2:

        x*_j = soft(x_j - (A^T r)_j / c, mu/(2c)),   d = x* - x

    which coincides with the proximal-gradient (ISTA) step of step size
    1/c. Defaults c to the problem's cached power-iteration estimate.
    """
    if not isinstance(composite, CompositeObjective):
        raise TypeError("dir_ssf needs a CompositeObjective")
    if c is None:
        c = composite.ssf_constant
    if not c > 0:
        raise ValueError("invalid majorizer")
    if atr is None:
        atr = composite.op.adjoint(r)
    return _kernels.ssf_direction(x, atr, c, composite.mu)


@dataclass
class OrthState:
    """Running state for the two auxiliary ORTH directions.

    Weights follow w_0 = 1, w_k = 1/2 + sqrt(1/4 + w_{k-1}^2), so the
    weighted gradient sum emphasizes recent gradients; the second direction
    is the total step x_k - x_0.
    """

    x0: np.ndarray
    w: float = 0.0
    k: int = 0
    weighted_grad_sum: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=np.float64).copy()


def dir_orth_update(state, x_k, g_k):
    """Advance the ORTH state with the iterate/gradient pair at step k.

    Returns (weighted_grad_dir, total_step_dir): the unit-normalized
    negative weighted gradient sum and x_k - x0. At k = 0 the total step is
    the zero vector (the frame builder drops it).
    """
    g_k = np.asarray(g_k, dtype=np.float64)
    if state.k == 0:
        state.w = 1.0
        state.weighted_grad_sum = state.w * g_k
    else:
        state.w = 0.5 + np.sqrt(0.25 + state.w * state.w)
        state.weighted_grad_sum = state.weighted_grad_sum + state.w * g_k
    state.k += 1

    wsum = state.weighted_grad_sum
    nrm = float(np.linalg.norm(wsum))
    wdir = -wsum / nrm if nrm > 0 else np.zeros_like(wsum)
    return wdir, np.asarray(x_k, dtype=np.float64) - state.x0


def dir_newton(obj, x, g):
    """Newton direction d = -H(x)^{-1} g via the objective's Hessian solve.

    Requires the hessian_solve capability; raises NewtonUnavailableError
    (message "newton direction unavailable") when the solve fails or the
    result is not a descent direction, so callers can fall back to the
    gradient. A zero gradient returns the zero vector.
    """
    g = np.asarray(g, dtype=np.float64)
    if not np.any(g):
        return np.zeros_like(g)
    d = obj.hessian_solve(x, -g)
    if not np.all(np.isfinite(d)) or float(g @ d) >= 0.0:
        raise NewtonUnavailableError("newton direction unavailable")
    return d
