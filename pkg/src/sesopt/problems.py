"""Benchmark problem generators.

Four families, all seeded and deterministic:

* ``make_quadratic_ls``: dense random least squares, noise-free rhs, so the
  optimum is known exactly (f_opt = 0).
* ``make_l1_ls``: least squares plus L1 with a log-spaced singular spectrum,
  condition number 10**kappa, sparse ground-truth signal.
* ``make_expsquares``: exp(-sum x) + (1/2) sum_j j^2 x_j^2, a classic smooth
  test with analytically reducible optimum.
* ``make_svm_smooth``: squared-hinge SVM primal on synthetic
  separable-with-violations data.

``ProblemSpec`` serializes the generator configuration to/from the flat
``key=value,key=value`` strings used by the CLI and trace headers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CompositeObjective, DenseOperator, Objective, seeded_rng

__all__ = [
    "GroundTruth",
    "ProblemSpec",
    "ExpSquaresObjective",
    "SvmSquaredHinge",
    "make_quadratic_ls",
    "make_l1_ls",
    "make_expsquares",
    "make_svm_smooth",
    "expsquares_ground_truth",
]


@dataclass
class GroundTruth:
    """Known optimum of a generated problem instance."""

    f_opt: float | None = None
    x_opt: np.ndarray | None = None
    method: str = "analytic"  # "analytic" or "oracle_solver"


@dataclass
class ProblemSpec:
    """Flat, serializable description of a problem instance."""

    kind: str
    n: int
    seed: int
    m: int | None = None
    mu: float = 0.0
    kappa: float = 0.0
    noise: float = 0.0
    c_penalty: float = 1.0
    margin: float = 1.0
    violation_frac: float = 0.0
    extras: dict = field(default_factory=dict)

    _FIELDS = ("kind", "n", "seed", "m", "mu", "kappa", "noise",
               "c_penalty", "margin", "violation_frac")

    def to_config(self):
        """Render as ``key=value,key=value`` (skips inapplicable fields)."""
        parts = [f"kind={self.kind}", f"n={self.n}", f"seed={self.seed}"]
        if self.m is not None:
            parts.append(f"m={self.m}")
        if self.kind == "l1_ls":
            parts += [f"mu={self.mu!r}", f"kappa={self.kappa!r}", f"noise={self.noise!r}"]
        elif self.kind == "quadratic_ls":
            parts.append(f"noise={self.noise!r}")
        elif self.kind == "svm_smooth":
            parts += [
                f"c_penalty={self.c_penalty!r}",
                f"margin={self.margin!r}",
                f"violation_frac={self.violation_frac!r}",
            ]
        return ",".join(parts)

    @classmethod
    def from_config(cls, text):
        """Parse a ``key=value,...`` string; unknown keys raise ValueError."""
        kv = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise ValueError(f"bad problem config item {item!r}")
            k, v = item.split("=", 1)
            kv[k.strip()] = v.strip()
        if "kind" not in kv:
            raise ValueError("problem config needs kind=...")
        kind = kv.pop("kind")
        spec = cls(kind=kind, n=0, seed=0)
        ints = {"n", "seed", "m"}
        for k, v in kv.items():
            if k not in cls._FIELDS:
                raise ValueError(f"unknown problem config key {k!r}")
            setattr(spec, k, int(v) if k in ints else float(v))
        if spec.n <= 0:
            raise ValueError("problem config needs n > 0")
        return spec

    def build(self):
        """Instantiate the objective described by this spec."""
        if self.kind == "quadratic_ls":
            obj = make_quadratic_ls(self.n, self.seed)
        elif self.kind == "l1_ls":
            m = self.m if self.m is not None else self.n
            obj = make_l1_ls(m, self.n, self.seed, mu=self.mu, kappa=self.kappa,
                             noise=self.noise if self.noise else 0.01)
        elif self.kind == "expsquares":
            obj = make_expsquares(self.n)
        elif self.kind == "svm_smooth":
            m = self.m if self.m is not None else 2 * self.n
            obj = make_svm_smooth(m, self.n, self.seed, c_penalty=self.c_penalty,
                                  margin=self.margin,
                                  violation_frac=self.violation_frac)
        else:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        obj.spec = self  # keep the requested config in trace headers
        return obj


def make_quadratic_ls(n, seed):
    """Dense noise-free least squares ||A x - b||^2.

    A is n x n with iid N(0, 1/n) entries, b = A @ x_star for a standard
    normal x_star, so f_opt = 0 at x_opt = x_star exactly.
    """
    rng = seeded_rng(seed)
    a = rng.normal(0.0, 1.0 / math.sqrt(n), size=(n, n))
    x_star = rng.standard_normal(n)
    b = a @ x_star
    obj = CompositeObjective(DenseOperator(a), b, mu=0.0)
    obj.ssf_constant  # estimate the majorizer at build time
    obj.ground_truth = GroundTruth(f_opt=0.0, x_opt=x_star, method="analytic")
    obj.x_signal = x_star
    obj.spec = ProblemSpec(kind="quadratic_ls", n=n, seed=seed, m=n, noise=0.0)
    obj.counters.reset()
    return obj


def make_l1_ls(m, n, seed, mu=1e-6, kappa=6.0, noise=0.01):
    """L1-regularized least squares with a controlled singular spectrum.

    A Gaussian m x n draw is reshaped by SVD to have singular values
    log-spaced from 1 down to 10**-kappa (condition number 10**kappa). The
    signal has ceil(0.05 n) nonzero standard-normal entries at seeded
    positions, and b = A @ x_signal + noise * rms(A @ x_signal) * gaussian.

    Requires m <= n (the compressed / underdetermined regime).
    """
    if m > n:
        raise ValueError("underdetermined generator expects m <= n")
    rng = seeded_rng(seed)
    g = rng.standard_normal((m, n))
    u, _, vt = np.linalg.svd(g, full_matrices=False)
    s = np.logspace(0.0, -float(kappa), num=m)
    a = (u * s) @ vt

    k_nz = math.ceil(0.05 * n)
    support = rng.choice(n, size=k_nz, replace=False)
    x_signal = np.zeros(n)
    x_signal[support] = rng.standard_normal(k_nz)

    clean = a @ x_signal
    b = clean.copy()
    if noise > 0:
        rms = float(np.linalg.norm(clean)) / math.sqrt(m)
        b = clean + noise * rms * rng.standard_normal(m)

    obj = CompositeObjective(DenseOperator(a), b, mu=mu)
    obj.ssf_constant
    obj.x_signal = x_signal
    obj.spec = ProblemSpec(kind="l1_ls", n=n, seed=seed, m=m, mu=mu,
                           kappa=float(kappa), noise=float(noise))
    obj.counters.reset()
    return obj


class ExpSquaresObjective(Objective):
    """f(x) = exp(-sum x) + (1/2) sum_j j^2 x_j^2 (j = 1..n).

    Smooth, strictly convex, with Hessian exp(-sum x) * ones ones^T +
    diag(j^2); the rank-one structure gives a closed-form Hessian solve.
    Values with sum(x) < -700 would overflow the exponential and raise.
    """

    def __init__(self, n):
        super().__init__(n)
        self.j2 = np.arange(1.0, n + 1.0) ** 2

    def _exp_term(self, x):
        s = float(np.sum(x))
        if s < -700.0:
            raise OverflowError("exponent overflow")
        return math.exp(-s)

    def _value(self, x):
        return self._exp_term(x) + 0.5 * float(self.j2 @ (x * x))

    def _grad(self, x):
        e = self._exp_term(x)
        return self.j2 * x - e

    def _value_and_grad(self, x):
        e = self._exp_term(x)
        return e + 0.5 * float(self.j2 @ (x * x)), self.j2 * x - e

    def _hvp(self, x, v):
        e = self._exp_term(x)
        return self.j2 * v + e * float(np.sum(v))

    def _hessian_solve(self, x, rhs):
        # (D + e * ones ones^T)^{-1} rhs via the rank-one update formula.
        e = self._exp_term(x)
        dinv_rhs = rhs / self.j2
        dinv_one = 1.0 / self.j2
        denom = 1.0 + e * float(np.sum(dinv_one))
        coef = e * float(np.sum(dinv_rhs)) / denom
        return dinv_rhs - coef * dinv_one


def expsquares_ground_truth(n, tol=1e-14):
    """Exact optimum of the exponents-and-squares objective.

    At the minimum j^2 x_j = exp(-sum x) for every j, so with S = sum j^-2
    the scalar s = sum x solves s = S * exp(-s); bisection to ``tol``. Then
    x_j = exp(-s) / j^2 and f_opt = exp(-s) + (1/2) exp(-2s) S.

    For n = 1 the fixed point s = exp(-s) is the omega constant
    0.5671432904...
    """
    j2 = np.arange(1.0, n + 1.0) ** 2
    big_s = float(np.sum(1.0 / j2))
    lo, hi = 0.0, big_s  # s - S e^{-s} is negative at 0, positive at S
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid - big_s * math.exp(-mid) < 0.0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    e = math.exp(-s)
    x_opt = e / j2
    f_opt = e + 0.5 * e * e * big_s
    return GroundTruth(f_opt=f_opt, x_opt=x_opt, method="analytic")


def make_expsquares(n):
    """Exponents-and-squares instance with its analytic ground truth."""
    obj = ExpSquaresObjective(n)
    obj.ground_truth = expsquares_ground_truth(n)
    obj.spec = ProblemSpec(kind="expsquares", n=n, seed=0)
    return obj


class SvmSquaredHinge(Objective):
    """Squared-hinge SVM primal:

        f(w) = 0.5 ||w||^2 + C * sum_i max(0, 1 - y_i x_i . w)^2

    Convex and differentiable with a piecewise-linear gradient; the
    generalized Hessian I + 2C X_act^T X_act (active margin rows) backs the
    hvp used by Newton-type solvers.
    """

    def __init__(self, x_rows, y, c_penalty):
        x_rows = np.ascontiguousarray(x_rows, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        super().__init__(x_rows.shape[1])
        self.x_rows = x_rows
        self.y = y
        self.c_penalty = float(c_penalty)

    def margins(self, w):
        return self.y * (self.x_rows @ w)

    def hinge_sq_sum(self, w):
        viol = np.maximum(0.0, 1.0 - self.margins(w))
        return float(viol @ viol)

    def _value(self, w):
        return 0.5 * float(w @ w) + self.c_penalty * self.hinge_sq_sum(w)

    def _grad(self, w):
        viol = np.maximum(0.0, 1.0 - self.margins(w))
        return w - 2.0 * self.c_penalty * ((viol * self.y) @ self.x_rows)

    def _value_and_grad(self, w):
        viol = np.maximum(0.0, 1.0 - self.margins(w))
        val = 0.5 * float(w @ w) + self.c_penalty * float(viol @ viol)
        return val, w - 2.0 * self.c_penalty * ((viol * self.y) @ self.x_rows)

    def _hvp(self, w, v):
        active = (1.0 - self.margins(w)) > 0.0
        xa = self.x_rows[active]
        return v + 2.0 * self.c_penalty * (xa.T @ (xa @ v))


def make_svm_smooth(num_examples, num_features, seed, c_penalty=1.0,
                    margin=1.0, violation_frac=0.05):
    """Synthetic squared-hinge SVM instance.

    Gaussian features are pushed to satisfy y_i x_i . w_ref >= margin for a
    seeded unit reference direction w_ref, then a seeded fraction of rows is
    label-flipped to create margin violations. With violation_frac = 0 the
    data is separable with the given margin and w = (2/margin) w_ref attains
    zero hinge loss.
    """
    rng = seeded_rng(seed)
    w_ref = rng.standard_normal(num_features)
    w_ref /= np.linalg.norm(w_ref)
    x_rows = rng.standard_normal((num_examples, num_features))
    y = np.where(x_rows @ w_ref >= 0.0, 1.0, -1.0)

    # push every point to margin distance from the separating hyperplane
    gap = margin - y * (x_rows @ w_ref)
    push = np.maximum(gap, 0.0)
    x_rows = x_rows + (push * y)[:, None] * w_ref[None, :]

    if violation_frac > 0:
        n_flip = int(round(violation_frac * num_examples))
        if n_flip:
            flip = rng.choice(num_examples, size=n_flip, replace=False)
            y[flip] = -y[flip]

    obj = SvmSquaredHinge(x_rows, y, c_penalty)
    obj.w_ref = w_ref
    obj.spec = ProblemSpec(kind="svm_smooth", n=num_features, seed=seed,
                           m=num_examples, c_penalty=float(c_penalty),
                           margin=float(margin),
                           violation_frac=float(violation_frac))
    return obj
