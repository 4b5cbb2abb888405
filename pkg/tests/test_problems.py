import math

import numpy as np
import pytest

from sesopt import (ProblemSpec, check_gradient, expsquares_ground_truth,
                    make_expsquares, make_l1_ls, make_quadratic_ls,
                    make_svm_smooth, seeded_rng)


# -- quadratic LS -------------------------------------------------------------

def test_quadratic_deterministic_and_scaled():
    p1 = make_quadratic_ls(400, seed=1)
    p2 = make_quadratic_ls(400, seed=1)
    np.testing.assert_array_equal(p1.op.matrix, p2.op.matrix)
    np.testing.assert_array_equal(p1.b, p2.b)
    assert not np.array_equal(p1.b, make_quadratic_ls(400, seed=2).b)
    # N(0, 1/n) entries: squared Frobenius norm concentrates near n
    fro2 = float(np.sum(p1.op.matrix ** 2))
    assert abs(fro2 / 400.0 - 1.0) < 0.05


def test_quadratic_ground_truth_exact():
    p = make_quadratic_ls(120, seed=7)
    gt = p.ground_truth
    assert gt.f_opt == 0.0
    assert p.value(gt.x_opt) <= 1e-22  # b built from the same product
    assert p.counters.matvecs == 1  # reset at build; the value() above


# -- l1 LS --------------------------------------------------------------------

def test_l1_conditioning_and_sparsity():
    p = make_l1_ls(50, 128, seed=3, mu=1e-4, kappa=4.0)
    s = np.linalg.svd(p.op.matrix, compute_uv=False)
    assert s[0] / s[-1] == pytest.approx(10.0 ** 4, rel=1e-6)
    assert s[0] == pytest.approx(1.0, rel=1e-9)
    k_nz = int(np.count_nonzero(p.x_signal))
    assert k_nz == math.ceil(0.05 * 128)
    assert p.mu == 1e-4


def test_l1_noise_level():
    p = make_l1_ls(200, 512, seed=1, noise=0.01)
    clean = p.op.matrix @ p.x_signal
    resid = float(np.linalg.norm(p.b - clean))
    expected = 0.01 * float(np.linalg.norm(clean))
    assert 0.5 * expected < resid < 1.5 * expected

    p0 = make_l1_ls(40, 64, seed=1, noise=0.0)
    np.testing.assert_array_equal(p0.b, p0.op.matrix @ p0.x_signal)


def test_l1_requires_underdetermined():
    with pytest.raises(ValueError):
        make_l1_ls(65, 64, seed=1)


# -- exponents and squares ----------------------------------------------------

def test_expsquares_oracle_stationary():
    for n in (1, 5, 200):
        p = make_expsquares(n)
        gt = p.ground_truth
        g = p.grad(gt.x_opt)
        assert float(np.linalg.norm(g)) <= 1e-10
        assert p.value(gt.x_opt) == pytest.approx(gt.f_opt, rel=1e-14)


def test_expsquares_omega_constant():
    # n = 1: the optimum solves x = exp(-x), the omega constant
    gt = expsquares_ground_truth(1)
    assert gt.x_opt[0] == pytest.approx(0.5671432904097838, abs=1e-12)


def test_expsquares_derivatives():
    p = make_expsquares(30)
    x = 0.1 * seeded_rng(9).standard_normal(30)
    assert check_gradient(p, x) <= 1e-7
    v = seeded_rng(10).standard_normal(30)
    # H = diag(j^2) + e ones ones^T with e = exp(-sum x)
    e = math.exp(-float(np.sum(x)))
    want = p.j2 * v + e * float(np.sum(v))
    np.testing.assert_allclose(p.hvp(x, v), want, rtol=1e-13)
    d = p.hessian_solve(x, v)
    np.testing.assert_allclose(p.hvp(x, d), v, rtol=1e-10, atol=1e-12)


def test_expsquares_overflow_guard():
    p = make_expsquares(4)
    with pytest.raises(OverflowError):
        p.value(np.full(4, -300.0))


# -- svm ----------------------------------------------------------------------

def test_svm_separable_construction():
    p = make_svm_smooth(60, 40, seed=2, margin=1.0, violation_frac=0.0)
    assert float(np.min(p.margins(2.0 * p.w_ref))) >= 2.0 - 1e-9
    assert p.hinge_sq_sum(2.0 * p.w_ref) == 0.0


def test_svm_violations_and_gradient():
    p = make_svm_smooth(80, 30, seed=4, violation_frac=0.1)
    # label flips create persistent margin violations
    assert p.hinge_sq_sum(2.0 * p.w_ref) > 0.0
    w = 0.3 * seeded_rng(11).standard_normal(30)
    # keep probes away from the hinge kinks so central differences are clean
    assert float(np.min(np.abs(1.0 - p.margins(w)))) > 1e-4
    assert check_gradient(p, w) <= 1e-5
    v = seeded_rng(12).standard_normal(30)
    assert float(v @ p.hvp(w, v)) >= float(v @ v) - 1e-12  # I + PSD part


# -- ProblemSpec --------------------------------------------------------------

def test_spec_round_trip():
    cfg = "kind=l1_ls,n=512,seed=1,m=200,mu=1e-06,kappa=6.0,noise=0.01"
    spec = ProblemSpec.from_config(cfg)
    assert (spec.kind, spec.n, spec.m, spec.seed) == ("l1_ls", 512, 200, 1)
    assert ProblemSpec.from_config(spec.to_config()) == spec


def test_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec.from_config("n=4,seed=1")  # no kind
    with pytest.raises(ValueError):
        ProblemSpec.from_config("kind=quadratic_ls,seed=1")  # no n
    with pytest.raises(ValueError):
        ProblemSpec.from_config("kind=quadratic_ls,n=4,bogus=1")
    with pytest.raises(ValueError):
        ProblemSpec.from_config("kind=quadratic_ls,n=4,seed")
    with pytest.raises(ValueError):
        ProblemSpec(kind="nope", n=4, seed=1).build()


def test_spec_build_stamps_requested_config():
    spec = ProblemSpec.from_config("kind=expsquares,n=50,seed=3")
    obj = spec.build()
    assert obj.spec is spec  # trace headers see the requested seed, not a default
    assert obj.dim == 50

    for cfg in ("kind=quadratic_ls,n=20,seed=1",
                "kind=l1_ls,n=32,m=16,seed=1,mu=0.001",
                "kind=svm_smooth,n=10,m=24,seed=1"):
        obj = ProblemSpec.from_config(cfg).build()
        assert obj.dim == ProblemSpec.from_config(cfg).n


def test_gradient_checks_all_kinds():
    # the l1 case checks the smoothed view away from the smoothing width
    probes = {
        "kind=quadratic_ls,n=25,seed=1": None,
        "kind=expsquares,n=25,seed=0": None,
        "kind=svm_smooth,n=25,m=40,seed=1": None,
    }
    for cfg in probes:
        obj = ProblemSpec.from_config(cfg).build()
        x = 0.25 * seeded_rng(21).standard_normal(obj.dim)
        assert check_gradient(obj, x) <= 1e-5, cfg

    l1 = ProblemSpec.from_config("kind=l1_ls,n=40,m=20,seed=1,mu=0.001").build()
    x = seeded_rng(22).standard_normal(40) + 1.0  # |x_j| >> eps
    assert check_gradient(l1.smoothed(), x) <= 1e-5
