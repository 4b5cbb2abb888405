"""Subspace frames and the per-iteration reduced minimization.

A frame is the affine search set x_k + span(D) assembled from the current
direction(s) and recent history. Columns are normalized and run through
modified Gram-Schmidt purely as a *selector* (drop tolerance 1e-10): the
surviving normalized original columns stay as the working basis, which
keeps cached operator products valid under the rescaling.

For composite objectives the reduced problem reuses the cached A*d
products, so the inner Newton loop performs zero new operator
applications; the accepted step's product A*(D alpha) then comes free as a
linear combination and can seed the history cache of the next iteration.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._kernels import smooth_abs, smooth_abs_grad, smooth_abs_hess
from .core import CompositeObjective

__all__ = [
    "EmptySubspaceError",
    "LineSearchError",
    "HistoryBuffer",
    "SubspaceFrame",
    "SubspaceResult",
    "build_frame",
    "subspace_minimize",
    "line_search_backtracking",
]


class EmptySubspaceError(RuntimeError):
    """No usable columns survived frame conditioning."""


class LineSearchError(RuntimeError):
    """Backtracking exhausted its budget without satisfying Armijo."""


class HistoryBuffer:
    """Ring buffer of recent steps / gradients with cached A-products."""

    def __init__(self, max_len=7):
        self.max_len = int(max_len)
        self._steps = deque(maxlen=self.max_len)
        self._grads = deque(maxlen=self.max_len)

    def push_step(self, step, a_step=None):
        self._steps.appendleft((np.asarray(step, dtype=np.float64),
                                None if a_step is None else np.asarray(a_step)))

    def push_grad(self, g, a_g=None):
        self._grads.appendleft((np.asarray(g, dtype=np.float64),
                                None if a_g is None else np.asarray(a_g)))

    def steps(self, k=None):
        """Newest-first list of (step, a_step or None); at most k entries."""
        out = list(self._steps)
        return out if k is None else out[:k]

    def grads(self, k=None):
        out = list(self._grads)
        return out if k is None else out[:k]

    def __len__(self):
        return len(self._steps)


@dataclass
class SubspaceFrame:
    """Conditioned affine search frame x_k + span(basis)."""

    base: np.ndarray
    basis: np.ndarray           # (n, m), unit-norm independent columns
    tags: list
    products: np.ndarray | None = None   # A @ basis when requested
    raw: list = field(default_factory=list)
    dropped: list = field(default_factory=list)

    @property
    def size(self):
        return self.basis.shape[1]


def build_frame(base, columns, history=None, max_history=None, *, op=None,
                with_products=False, reuse_products=True, drop_tol=1e-10):
    """Assemble and condition a subspace frame.

    ``columns`` is an iterable of (vector, tag, a_vector-or-None)
    submissions in priority order; history steps (newest first, up to
    ``max_history``) are appended after them. Near-dependent columns are
    dropped by modified Gram-Schmidt on normalized copies with the given
    tolerance, so duplicated directions collapse to one column.

    With ``with_products`` the returned frame carries A @ basis, reusing
    cached products where provided (``reuse_products=False`` forces fresh
    operator applications; only the matvec counter changes).

    Raises EmptySubspaceError when nothing survives.
    """
    base = np.asarray(base, dtype=np.float64)
    subs = [(np.asarray(v, dtype=np.float64), t, av) for v, t, av in columns]
    if history is not None:
        for i, (step, a_step) in enumerate(history.steps(max_history)):
            subs.append((step, f"step-{i + 1}", a_step))

    raw = [(v, t) for v, t, _ in subs]
    kept, dropped, ortho = [], [], []
    for vec, tag, avec in subs:
        nrm = float(np.linalg.norm(vec))
        if not np.isfinite(nrm) or nrm <= 0.0:
            dropped.append(tag)
            continue
        u = vec / nrm
        w = u.copy()
        for q in ortho:
            w -= (q @ w) * q
        wn = float(np.linalg.norm(w))
        if wn <= drop_tol:
            dropped.append(tag)
            continue
        ortho.append(w / wn)
        kept.append((u, tag, None if avec is None else avec / nrm))

    if not kept:
        raise EmptySubspaceError("empty subspace")

    basis = np.column_stack([u for u, _, _ in kept])
    tags = [t for _, t, _ in kept]
    products = None
    if with_products:
        if op is None:
            raise ValueError("with_products requires an operator")
        cols = []
        for u, _, au in kept:
            if au is None or not reuse_products:
                au = op.apply(u)
            cols.append(au)
        products = np.column_stack(cols)
    return SubspaceFrame(base=base, basis=basis, tags=tags, products=products,
                         raw=raw, dropped=dropped)


@dataclass
class SubspaceResult:
    alpha: np.ndarray
    x: np.ndarray
    f: float
    residual: np.ndarray | None
    inner_iters: int
    grad_norm: float
    events: list


def _armijo_reduced(phi, alpha, delta, f0, slope, c1=1e-4, rho=0.5, max_bt=40):
    """Backtrack t along delta in reduced coordinates; None if no decrease."""
    t = 1.0
    for _ in range(max_bt + 1):
        cand = alpha + t * delta
        f_new = phi(cand)
        if f_new <= f0 + c1 * t * slope:
            return cand, f_new
        t *= rho
    return None, f0


def subspace_minimize(obj, frame, alpha0=None, inner_tol=1e-10, max_inner=20,
                      residual=None):
    """Minimize the objective over the affine frame by damped Newton.

    Composite objectives take the cached-products path: the reduced
    gradient and Hessian are built from A*D, the residual at the base and
    the smoothed L1 curvature, so no operator is applied during the inner
    loop. Other objectives use value/grad/hvp at full-space points.

    The exact composite value is re-checked at the end and the step is
    shrunk if smoothing ever made it an ascent step, so the returned f
    never exceeds f at the base point. If Newton stalls completely, a
    backtracking search along the first frame column is attempted and the
    event is recorded.
    """
    d = frame.basis
    m = frame.size
    alpha = np.zeros(m) if alpha0 is None else np.asarray(alpha0, dtype=np.float64).copy()
    events = []

    if isinstance(obj, CompositeObjective):
        return _minimize_composite(obj, frame, alpha, inner_tol, max_inner,
                                   residual, events)

    if "hvp" not in obj.capabilities:
        raise ValueError("subspace_minimize needs hvp for smooth objectives")

    x0 = frame.base

    def phi(a):
        return obj.value(x0 + d @ a)

    def phi_grad(a):
        return d.T @ obj.grad(x0 + d @ a)

    f_base = phi(np.zeros(m))
    f_cur = phi(alpha) if np.any(alpha) else f_base
    g = phi_grad(alpha)
    g0_norm = float(np.linalg.norm(g))
    tol = inner_tol * (1.0 + g0_norm)
    it = 0
    while it < max_inner and float(np.linalg.norm(g)) > tol:
        xa = x0 + d @ alpha
        hess = d.T @ np.column_stack([obj.hvp(xa, d[:, j]) for j in range(m)])
        delta = _newton_step(hess, g)
        slope = float(g @ delta)
        if slope >= 0.0:
            delta = -g
            slope = -float(g @ g)
        cand, f_new = _armijo_reduced(phi, alpha, delta, f_cur, slope)
        if cand is None:
            break
        alpha, f_cur = cand, f_new
        g = phi_grad(alpha)
        it += 1

    if f_cur > f_base:  # smooth path: never leave the base sublevel set
        alpha = np.zeros(m)
        f_cur = f_base
        events.append("no_progress")
    if not np.any(alpha) and float(np.linalg.norm(g)) > tol:
        alpha, f_cur, ev = _first_column_fallback(phi, phi_grad, m, f_base)
        events.extend(ev)
    x_new = x0 + d @ alpha
    return SubspaceResult(alpha=alpha, x=x_new, f=f_cur, residual=None,
                          inner_iters=it, grad_norm=float(np.linalg.norm(g)),
                          events=events)


def _newton_step(hess, g):
    try:
        delta = np.linalg.solve(hess, -g)
        if np.all(np.isfinite(delta)):
            return delta
    except np.linalg.LinAlgError:
        pass
    return -g


def _first_column_fallback(phi, phi_grad, m, f_base):
    """Backtracking along the first frame column when Newton made no move."""
    g0 = phi_grad(np.zeros(m))
    slope = float(g0[0])
    direction = -1.0 if slope > 0 else 1.0
    slope = slope * direction
    if slope >= 0.0:
        return np.zeros(m), f_base, ["no_progress"]
    e0 = np.zeros(m)
    e0[0] = direction
    cand, f_new = _armijo_reduced(phi, np.zeros(m), e0, f_base, slope, max_bt=60)
    if cand is None:
        return np.zeros(m), f_base, ["no_progress"]
    return cand, f_new, ["fallback_first_column"]


def _minimize_composite(comp, frame, alpha, inner_tol, max_inner, residual,
                        events):
    d = frame.basis
    ad = frame.products
    if ad is None:
        raise ValueError("composite subspace minimization needs frame products")
    m = frame.size
    x0 = frame.base
    r0 = comp.residual(x0) if residual is None else np.asarray(residual, dtype=np.float64)
    mu, eps = comp.mu, comp.smoothing_eps
    gram2 = 2.0 * (ad.T @ ad)

    def parts(a):
        return x0 + d @ a, r0 + ad @ a

    def phi(a):
        xa, ra = parts(a)
        v = float(ra @ ra)
        if mu != 0.0:
            v += mu * float(np.sum(smooth_abs(xa, eps)))
        return v

    def phi_grad(xa, ra):
        g = 2.0 * (ad.T @ ra)
        if mu != 0.0:
            g = g + d.T @ (mu * smooth_abs_grad(xa, eps))
        return g

    f_base_exact = comp.value_from_residual(r0, x0)
    xa, ra = parts(alpha)
    f_cur = phi(alpha)
    g = phi_grad(xa, ra)
    g0_norm = float(np.linalg.norm(g))
    tol = inner_tol * (1.0 + g0_norm)
    it = 0
    while it < max_inner and float(np.linalg.norm(g)) > tol:
        hess = gram2.copy()
        if mu != 0.0:
            hess += (d.T * (mu * smooth_abs_hess(xa, eps))) @ d
        delta = _newton_step(hess, g)
        slope = float(g @ delta)
        if slope >= 0.0:
            delta = -g
            slope = -float(g @ g)
        cand, f_new = _armijo_reduced(phi, alpha, delta, f_cur, slope)
        if cand is None:
            break
        alpha, f_cur = cand, f_new
        xa, ra = parts(alpha)
        g = phi_grad(xa, ra)
        it += 1

    if not np.any(alpha) and float(np.linalg.norm(g)) > tol:
        alpha, f_cur, ev = _first_column_fallback(
            phi, lambda a: phi_grad(*parts(a)), m, phi(np.zeros(m)))
        events.extend(ev)
        xa, ra = parts(alpha)

    # smoothing safety: never let the exact composite value increase
    f_exact = comp.value_from_residual(ra, xa)
    shrink = 0
    while f_exact > f_base_exact and shrink < 60:
        alpha = 0.5 * alpha
        xa, ra = parts(alpha)
        f_exact = comp.value_from_residual(ra, xa)
        shrink += 1
    if f_exact > f_base_exact:
        alpha = np.zeros(m)
        xa, ra = x0.copy(), r0.copy()
        f_exact = f_base_exact
        events.append("no_progress")
    if shrink:
        events.append("smoothing_shrink")

    return SubspaceResult(alpha=alpha, x=xa, f=f_exact, residual=ra,
                          inner_iters=it, grad_norm=float(np.linalg.norm(g)),
                          events=events)


def line_search_backtracking(obj, x, d, f_x=None, g_x=None, c1=1e-4, rho=0.5,
                             max_backtracks=60):
    """Armijo backtracking from t = 1.

    Accepts the first t = rho^j with f(x + t d) <= f(x) + c1 t <g, d>.
    Requires a descent direction; raises LineSearchError ("line search
    failed") after ``max_backtracks`` shrinks.

    Returns (t, f_new).
    """
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if f_x is None:
        f_x = obj.value(x)
    if g_x is None:
        g_x = obj.grad(x)
    slope = float(np.asarray(g_x) @ d)
    if slope >= 0.0:
        raise ValueError("line search needs a descent direction")
    t = 1.0
    for _ in range(max_backtracks + 1):
        f_new = obj.value(x + t * d)
        if f_new <= f_x + c1 * t * slope:
            return t, f_new
        t *= rho
    raise LineSearchError("line search failed")
