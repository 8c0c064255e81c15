import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtwist.chart import make_spec
from mtwist.discrepancy import structured_vs_oracle
from mtwist.errors import PreconditionError
from mtwist.library import random_points, random_spec
from mtwist.oracle import riemann
from mtwist.twisted import (curvature_clause, lc_connection, lc_curvature, lc_curvature_tensor,
                            lc_ricci, lc_ricci_tensor, lc_scalar, mixed_ricci_flat_check)


def one_fiber(warp, fiber_dim=1, base=None, box=None):
    base = base or ([["-1"]], ["t"])
    names = ["x", "y"][:fiber_dim]
    metric = [["1" if i == j else "0" for j in range(fiber_dim)] for i in range(fiber_dim)]
    return make_spec(base[0], base[1], [("F", fiber_dim, names, metric)], [warp], domain_box=box)


def two_fibers(w1="exp(0.3*t)", w2="2 + t"):
    return make_spec([["-1"]], ["t"], [("F1", 1, ["x"], [["1"]]), ("F2", 1, ["y"], [["1"]])], [w1, w2])


def test_flat_base_connection_vanishes():
    spec = one_fiber("1", base=([["1", "0"], ["0", "1"]], ["t", "s"]))
    assert np.all(lc_connection(spec, [0.1, 0.2, 0.3], [1, 0, 0], [0, 1, 0]) == 0)


def test_exponential_warp_shifts_fiber_vector():
    spec = one_fiber("exp(t)")
    np.testing.assert_allclose(lc_connection(spec, [0.3, 0.1], [1, 0], [0, 1]), [0, 1], atol=1e-14)


def test_distinct_fibers_do_not_connect():
    assert np.all(lc_connection(two_fibers(), [0.2, 0.1, 0.3], [0, 1, 0], [0, 0, 1]) == 0)


def test_zero_curvature_clauses():
    spec = make_spec([["-1"]], ["t"], [("F1", 2, ["x", "y"], [["1", "0"], ["0", "1 + x^2"]]),
                                       ("F2", 1, ["z"], [["1"]])], ["exp(0.3*t + 0.2*x^2)", "2 + t"])
    p = np.array([0.2, 0.3, -0.1, 0.4])
    V, W, U = np.eye(4)[1], np.eye(4)[2], np.eye(4)[3]
    assert np.all(lc_curvature(spec, p, V, W, U) == 0)
    assert curvature_clause(spec, p, V, W, U) == curvature_clause(spec, p, W, V, U)
    assert np.abs(riemann(spec, p).riemann[:, 1, 2, 3]).max() < 1e-8
    flat = one_fiber("1", base=([["1", "0"], ["0", "1"]], ["t", "s"]))
    e = np.eye(3)
    assert np.all(lc_curvature(flat, [0, 0, 0], e[0], e[1], e[0]) == 0)


def test_clause_choice_depends_only_on_blocks():
    spec = two_fibers()
    p = [0.2, 0.1, 0.3]
    a = curvature_clause(spec, p, [1, 0, 0], [0, 1, 0], [0, 1, 0])
    b = curvature_clause(spec, p, [2, 0, 0], [0, -3, 0], [0, 0.5, 0])
    assert a == b
    assert a != curvature_clause(spec, p, [1, 0, 0], [0, 1, 0], [0, 0, 1])


def test_warped_curvature_matches_oracle():
    spec = one_fiber("exp(t)", fiber_dim=2)
    for p in random_points(spec, 3, 0):
        np.testing.assert_allclose(lc_curvature_tensor(spec, p), riemann(spec, p).riemann, atol=1e-7)


def test_mixed_ricci_for_warped_factor_vanishes():
    spec = one_fiber("exp(t)", fiber_dim=2)
    assert abs(lc_ricci(spec, [0.2, 0.1, 0.3], [1, 0, 0], [0, 1, 0])) < 1e-14


def test_mixed_ricci_for_twisted_factor():
    # V X ln(e^{t x}) = 1 and (l - 1) = 1
    spec = one_fiber("exp(t*x)", fiber_dim=2)
    p = np.array([0.01, 0.02, 0.0])
    assert abs(lc_ricci(spec, p, [0, 1, 0], [1, 0, 0]) - 1.0) < 1e-12
    assert abs(riemann(spec, p).ricci[1, 0] - 1.0) < 1e-8


def test_flat_scalar_is_zero():
    assert lc_scalar(one_fiber("1", 2), [0.1, 0.2, 0.3]) == 0


def test_base_only_warp_scalar_matches_oracle():
    spec = one_fiber("1 + 0.5*t^2", 2)
    p = np.array([0.4, 0.1, 0.2])
    assert abs(lc_scalar(spec, p) - riemann(spec, p).scalar) < 1e-7


def test_grw_exponential_scalar_matches_closed_form():
    # for f = e^t on an l-dimensional flat fiber the Levi-Civita scalar is -2l - l(l-1)
    for l in (1, 2):
        spec = one_fiber("exp(t)", l)
        p = np.array([0.3] + [0.1] * l)
        assert abs(lc_scalar(spec, p) - (-2 * l - l * (l - 1))) < 1e-12
        assert abs(riemann(spec, p).scalar - (-2 * l - l * (l - 1))) < 1e-7


@pytest.mark.parametrize("seed", range(8))
def test_random_specs_agree_with_oracle(seed):
    spec = random_spec(seed)
    rep = structured_vs_oracle(spec, random_points(spec, 3, seed), "lc", tol=1e-6)
    assert rep["ok"], rep["max"]


def test_mixed_flat_check_verdicts():
    box = [[0, 1], [-1, 1], [-1, 1]]
    rep = mixed_ricci_flat_check(one_fiber("exp(t)", 2, box=box), per_axis=3)
    assert rep["mixed_ricci_flat"] and rep["consistent"]
    rep = mixed_ricci_flat_check(one_fiber("exp(t)*exp(x^2)", 2, box=box), per_axis=3)
    assert rep["mixed_ricci_flat"] and rep["expressible_as_warped"]
    rep = mixed_ricci_flat_check(one_fiber("exp(t*x)", 2, box=box), per_axis=3)
    assert not rep["mixed_ricci_flat"] and not rep["expressible_as_warped"] and rep["consistent"]


def test_mixed_flat_check_needs_large_fibers():
    with pytest.raises(PreconditionError):
        mixed_ricci_flat_check(one_fiber("exp(t)", 1))


def test_ricci_tensor_symmetry():
    spec = random_spec(3)
    ric = lc_ricci_tensor(spec, random_points(spec, 1, 3)[0])
    assert np.abs(ric - ric.T).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 50), st.floats(-2, 2), st.floats(-2, 2))
def test_curvature_is_multilinear(seed, a, b):
    spec = random_spec(seed % 6)
    p = random_points(spec, 1, seed)[0]
    rng = np.random.default_rng(seed)
    X, Y, Z, W = rng.normal(size=(4, spec.dim))
    lhs = lc_curvature(spec, p, a * X + b * W, Y, Z)
    rhs = a * lc_curvature(spec, p, X, Y, Z) + b * lc_curvature(spec, p, W, Y, Z)
    assert np.abs(lhs - rhs).max() <= 1e-11 * (1 + np.abs(rhs).max())
    lhs = lc_curvature(spec, p, X, Y, a * Z + b * W)
    rhs = a * lc_curvature(spec, p, X, Y, Z) + b * lc_curvature(spec, p, X, Y, W)
    assert np.abs(lhs - rhs).max() <= 1e-11 * (1 + np.abs(rhs).max())
