import numpy as np
import pytest

from mtwist.chart import assemble_metric, make_spec
from mtwist.errors import PreconditionError
from mtwist.geodesics import (CurveSegment, VariationField, boundary_term, covariant_derivative_along,
                              covariant_derivative_along_oracle, geodesic_integrate, geodesic_rhs,
                              index_form, read_curve_csv, read_variation_csv, second_variation_fd,
                              static_geodesic_rhs, static_index_form, write_curve_csv,
                              write_variation_csv)
from mtwist.library import sinusoidal_fields, static_library, unit_timelike
from mtwist.oracle import metric_field


def flat():
    return make_spec([["-1"]], ["t"], [("F", 1, ["x"], [["1"]])], ["1"])


def norms(spec, curve):
    g = metric_field(spec).value(curve.points)
    return np.einsum("nab,na,nb->n", g, curve.velocity, curve.velocity)


def test_flat_geodesic_is_a_line():
    c = geodesic_integrate(flat(), [0.0, 0.1], [1.0, 0.5], (0, 1))
    np.testing.assert_allclose(c.points, np.c_[c.t, 0.1 + 0.5 * c.t], atol=1e-13)
    n = norms(flat(), c)
    assert np.abs(n - n[0]).max() < 1e-12


def test_static_rest_curve_stays_put():
    spec = static_library()[0]
    c = geodesic_integrate(spec, [0.0, 0.3, 0.2, -0.1], [1.0, 0.0, 0.0, 0.0], (0, 1))
    np.testing.assert_allclose(c.points[:, 1:], np.tile([0.3, 0.2, -0.1], (len(c.t), 1)), atol=1e-14)
    np.testing.assert_allclose(c.points[:, 0], c.t, atol=1e-13)


def test_structured_and_oracle_systems_agree():
    spec = static_library()[2]
    rng = np.random.default_rng(0)
    for _ in range(5):
        y = np.concatenate([rng.uniform(-0.4, 0.4, 4), rng.normal(size=4)])
        a = geodesic_rhs(spec)(0.0, y)
        b = geodesic_rhs(spec, "oracle")(0.0, y)
        c = static_geodesic_rhs(spec)(0.0, y)
        assert np.abs(a - b).max() < 1e-10 and np.abs(c - b).max() < 1e-10


def test_grw_fiber_motion_resubstitutes():
    spec = make_spec([["-1"]], ["t"], [("F", 1, ["x"], [["1"]])], ["exp(t)"])
    v0 = unit_timelike(spec, [0, 0], [1.0, 0.4])
    c = geodesic_integrate(spec, [0.0, 0.0], v0, (0, 1))
    ora = geodesic_rhs(spec, "oracle")
    for k in range(0, len(c.t), 100):
        y = np.concatenate([c.points[k], c.velocity[k]])
        assert np.abs(ora(0.0, y)[2:] - c.accel[k]).max() < 1e-6
    assert np.abs(norms(spec, c) + 1).max() < 1e-8


@pytest.mark.parametrize("idx", range(3))
def test_norm_is_conserved(idx):
    spec = static_library()[idx]
    p0 = np.array([0.0, 0.2, 0.1, -0.2])
    v0 = unit_timelike(spec, p0, [1.0, 0.3, -0.2, 0.25])
    c = geodesic_integrate(spec, p0, v0, (0, 1), 1e-3)
    assert np.abs(norms(spec, c) + 1).max() < 1e-8


def test_batched_integration_matches_single():
    spec = static_library()[1]
    p0 = np.array([[0.0, 0.1, 0.0, 0.0], [0.1, -0.1, 0.2, 0.1]])
    v0 = np.array([[1.0, 0.2, 0.1, 0.0], [1.2, 0.0, -0.1, 0.3]])
    many = geodesic_integrate(spec, p0, v0, (0, 0.5), 1e-2)
    for k in range(2):
        one = geodesic_integrate(spec, p0[k], v0[k], (0, 0.5), 1e-2)
        np.testing.assert_allclose(many[k].points, one.points, atol=1e-14)


def test_constant_field_on_flat_space_is_parallel():
    c = geodesic_integrate(flat(), [0, 0], [1, 0.3], (0, 1), 1e-2)
    V = VariationField(c.t, np.tile([0.2, -0.7], (len(c.t), 1)))
    assert np.abs(covariant_derivative_along(flat(), c, V, np.linspace(0, 1, 7))).max() < 1e-14


def test_base_parallel_field_along_fixed_fiber_point():
    spec = make_spec([["-1", "0"], ["0", "1"]], ["t", "s"], [("F", 1, ["x"], [["1"]])], ["exp(0.3*t + 0.2*x^2)"])
    c = geodesic_integrate(spec, [0, 0, 0.4], [1.0, 0.3, 0.0], (0, 1), 1e-2)
    V = VariationField(c.t, np.tile([0.5, -0.2, 0.0], (len(c.t), 1)))
    assert np.abs(covariant_derivative_along(spec, c, V, np.linspace(0, 1, 9))).max() < 1e-12


@pytest.mark.parametrize("idx", range(3))
def test_covariant_derivative_matches_oracle(idx):
    spec = static_library()[idx]
    p0 = np.array([0.0, 0.1, 0.2, 0.0])
    c = geodesic_integrate(spec, p0, unit_timelike(spec, p0, [1, 0.2, 0.3, -0.1]), (0, 1), 1e-2)
    V = sinusoidal_fields(spec, c, count=1, seed=idx)[0]
    s = np.linspace(0.05, 0.95, 11)
    a = covariant_derivative_along(spec, c, V, s)
    b = covariant_derivative_along_oracle(spec, c, V, s)
    assert np.abs(a - b).max() < 1e-7


def test_out_of_span_time_rejected():
    c = geodesic_integrate(flat(), [0, 0], [1, 0], (0, 1), 1e-1)
    V = VariationField(c.t, np.zeros((len(c.t), 2)))
    with pytest.raises(ValueError):
        covariant_derivative_along(flat(), c, V, 1.5)


@pytest.fixture(scope="module")
def static_case():
    spec = static_library()[0]
    p0 = np.array([0.0, 0.1, 0.2, 0.0])
    v0 = unit_timelike(spec, p0, [1.0, 0.3, 0.2, -0.1])
    c = geodesic_integrate(spec, p0, v0, (0, 1), 1e-3)
    return spec, c, sinusoidal_fields(spec, c, count=3, seed=7)


def test_zero_field_has_zero_index(static_case):
    spec, c, _ = static_case
    Z = VariationField(c.t, np.zeros_like(c.points), vanishes_at_ends=True)
    assert index_form(spec, c, Z) == 0.0
    assert second_variation_fd(spec, c, Z) == 0.0


def test_index_form_symmetric_and_polarized(static_case):
    spec, c, (V, W, _) = static_case
    ivw, iwv = index_form(spec, c, V, W), index_form(spec, c, W, V)
    assert abs(ivw - iwv) < 1e-10
    ivv, iww, isum = index_form(spec, c, V), index_form(spec, c, W), index_form(spec, c, V + W)
    assert abs(isum - ivv - iww - 2 * ivw) < 1e-8 * max(1.0, abs(isum))


def test_static_reduction_matches_general_form(static_case):
    spec, c, fields = static_case
    for V in fields:
        assert abs(static_index_form(spec, c, V) - index_form(spec, c, V)) < 1e-8


def test_boundary_term_vanishes(static_case):
    spec, c, fields = static_case
    for V in fields:
        assert max(map(abs, boundary_term(spec, c, V))) < 1e-12


def test_index_form_matches_second_variation(static_case):
    spec, c, fields = static_case
    for V in fields:
        I, fd = index_form(spec, c, V), second_variation_fd(spec, c, V)
        assert abs(I - fd) < max(1e-4, 1e-2 * abs(I))


def test_flat_transverse_arch():
    spec = make_spec([["-1"]], ["t"], [("F", 2, ["x", "y"], [["1", "0"], ["0", "1"]])], ["1"])
    c = geodesic_integrate(spec, [0, 0, 0], [1, 0, 0], (0, 1), 1e-3)
    V = VariationField(c.t, np.c_[0 * c.t, 0.1 * np.sin(np.pi * c.t), 0 * c.t], vanishes_at_ends=True)
    I = index_form(spec, c, V)
    assert abs(I - (-0.01 * np.pi**2 / 2)) < 1e-6
    assert abs(I - second_variation_fd(spec, c, V)) < 1e-4


def test_base_and_first_fiber_variation(static_case):
    spec, _, _ = static_case
    p0 = np.array([0.0, 0.1, 0.0, 0.0])
    c = geodesic_integrate(spec, p0, unit_timelike(spec, p0, [1.0, 0.4, 0.0, 0.0]), (0, 1), 1e-3)
    nu = 0.2 * np.sin(np.pi * c.t)
    g = np.array([assemble_metric(spec, x) for x in c.points])
    f1sq = g[:, 1, 1]
    nu_b = f1sq * c.velocity[:, 1] * nu / c.velocity[:, 0]
    V = VariationField(c.t, np.c_[nu_b, nu, 0 * nu, 0 * nu], vanishes_at_ends=True)
    I = static_index_form(spec, c, V)
    assert abs(I - second_variation_fd(spec, c, V)) < max(1e-4, 1e-2 * abs(I))


def test_rejects_non_unit_curve():
    c = geodesic_integrate(flat(), [0, 0], [2.0, 0.0], (0, 1), 1e-2)
    V = VariationField(c.t, np.zeros((len(c.t), 2)), vanishes_at_ends=True)
    with pytest.raises(PreconditionError):
        index_form(flat(), c, V)


def test_csv_round_trip(tmp_path, static_case):
    spec, c, (V, *_) = static_case
    write_curve_csv(tmp_path / "c.csv", c)
    write_variation_csv(tmp_path / "v.csv", V)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "t,x0,x1,x2,x3,v0,v1,v2,v3"
    c2 = read_curve_csv(tmp_path / "c.csv")
    V2 = read_variation_csv(tmp_path / "v.csv")
    assert np.array_equal(c2.points, c.points) and np.array_equal(V2.values, V.values)
    assert abs(index_form(spec, c2, V2) - index_form(spec, c, V)) < 1e-6


def test_curve_times_must_increase():
    with pytest.raises(ValueError):
        CurveSegment([0.0, 0.0], np.zeros((2, 2)), np.zeros((2, 2)))
