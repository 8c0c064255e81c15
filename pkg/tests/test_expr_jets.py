import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtwist.errors import DomainError, ExprSyntaxError, UnboundVariableError
from mtwist.expr import Call, Var, jet3, jet3_fd, parse_expr, substitute


def test_parse_exp_builds_call_node():
    e = parse_expr("exp(t)", ["t"])
    assert e == Call("exp", Var("t"))


def test_syntax_error_reports_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("t + ", ["t"])
    assert err.value.offset == 4


def test_unbound_variable_is_named():
    with pytest.raises(UnboundVariableError) as err:
        parse_expr("b1^2 * sin(x)", ["x"])
    assert err.value.name == "b1"


def test_domain_error_on_log_of_zero():
    with pytest.raises(DomainError):
        parse_expr("log(t)", ["t"]).evaluate({"t": 0.0})


def test_square_jet():
    j = jet3("t^2", {"t": 3.0}, ["t"])
    assert float(j.v) == 9.0
    assert j.d1[0] == 6.0 and j.d2[0, 0] == 2.0 and j.d3[0, 0, 0] == 0.0


def test_exp_jet_at_zero_is_all_ones():
    j = jet3("exp(t)", {"t": 0.0}, ["t"])
    assert [float(j.v), j.d1[0], j.d2[0, 0], j.d3[0, 0, 0]] == [1.0, 1.0, 1.0, 1.0]


def _cubic_coeffs(rng):
    # c0 + sum a_i x_i + sum b_ij x_i x_j + sum c_ijk x_i x_j x_k with symmetric tensors
    a = rng.normal(size=2)
    b = rng.normal(size=(2, 2))
    b = (b + b.T) / 2
    c = rng.normal(size=(2, 2, 2))
    c = sum(c.transpose(p) for p in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]) / 6
    return float(rng.normal()), a, b, c


def _poly_text(c0, a, b, c):
    terms = [repr(c0)]
    names = ["x", "y"]
    for i in range(2):
        terms.append(f"({float(a[i])!r})*{names[i]}")
        for j in range(2):
            terms.append(f"({float(b[i, j])!r})*{names[i]}*{names[j]}")
            for k in range(2):
                terms.append(f"({float(c[i, j, k])!r})*{names[i]}*{names[j]}*{names[k]}")
    return " + ".join(terms)


@pytest.mark.parametrize("seed", range(5))
def test_cubic_jet_at_origin_matches_coefficients(seed):
    c0, a, b, c = _cubic_coeffs(np.random.default_rng(seed))
    j = jet3(_poly_text(c0, a, b, c), {"x": 0.0, "y": 0.0}, ["x", "y"])
    assert np.isclose(float(j.v), c0, atol=1e-14)
    np.testing.assert_allclose(j.d1, a, atol=1e-14)
    np.testing.assert_allclose(j.d2, 2 * b, atol=1e-14)
    np.testing.assert_allclose(j.d3, 6 * c, atol=1e-13)


SMOOTH = ["exp(0.3*x)*sin(y) + x^3*y", "sqrt(2 + x^2 + y^2)", "log(3 + x*y) / (1 + y^2)",
          "cos(x - 2*y)^2 + (1 + x^2)^(-1.5)"]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SMOOTH), st.floats(-1, 1), st.floats(-1, 1))
def test_jet_gradient_matches_finite_differences(text, x, y):
    pt = {"x": x, "y": y}
    exact = jet3(text, pt, ["x", "y"])
    fd = jet3_fd(text, pt, ["x", "y"])
    scale = max(1.0, float(np.abs(exact.d1).max()))
    assert np.abs(exact.d1 - fd.d1).max() <= 1e-6 * scale
    assert np.abs(exact.d2 - fd.d2).max() <= 1e-4 * max(1.0, float(np.abs(exact.d2).max()))


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_jet_is_linear(alpha, beta, x, y):
    f, g = "exp(x)*y^2", "sin(x*y) + x^3"
    pt, wrt = {"x": x, "y": y}, ["x", "y"]
    combo = jet3(f"({alpha!r})*({f}) + ({beta!r})*({g})", pt, wrt)
    jf, jg = jet3(f, pt, wrt), jet3(g, pt, wrt)
    for attr in ("v", "d1", "d2", "d3"):
        want = alpha * getattr(jf, attr) + beta * getattr(jg, attr)
        np.testing.assert_allclose(getattr(combo, attr), want, rtol=1e-12, atol=1e-12)


def test_symbolic_derivative_agrees_with_jet():
    e = parse_expr("exp(t*x) + x^2*sin(t)", ["t", "x"])
    pt = {"t": 0.4, "x": -0.7}
    j = e.jet(pt, ["t", "x"], order=2)
    assert math.isclose(float(e.diff("t").evaluate(pt)), j.d1[0], rel_tol=1e-13)
    assert math.isclose(float(e.diff("x").diff("t").evaluate(pt)), j.d2[0, 1], rel_tol=1e-13)


def test_substitute_freezes_variables():
    e = parse_expr("t*x + 1", ["t", "x"])
    assert float(substitute(e, {"t": 2.0}).evaluate({"x": 3.0})) == 7.0


def test_vectorised_evaluation():
    e = parse_expr("t^2 + 1", ["t"])
    np.testing.assert_allclose(e.evaluate({"t": np.array([0.0, 1.0, 2.0])}), [1.0, 2.0, 5.0])
