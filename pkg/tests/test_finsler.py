import numpy as np
import pytest

from mtwist.chart import make_spec
from mtwist.errors import SpecError
from mtwist.finsler import (FinslerMetric, berwald_tensors, cartan_blocks, cartan_tensor,
                            fundamental_tensor, load_finsler, make_factor, make_product,
                            quartic_factor, randers_factor, riemannian_factor, sample_points,
                            spray_generic, spray_structured, structure_predicates)
from mtwist.library import random_finsler_product
from mtwist.oracle import christoffel


def fd_fundamental(m, x, y, h=1e-4):
    L = lambda yy: m.norm(x, yy) ** 2  # noqa: E731
    n = len(y)
    g = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            e_i, e_j = np.eye(n)[i] * h, np.eye(n)[j] * h
            g[i, j] = (L(y + e_i + e_j) - L(y + e_i - e_j) - L(y - e_i + e_j) + L(y - e_i - e_j)) / (8 * h * h)
    return g


def test_euclidean_fundamental_tensor_is_identity():
    m = FinslerMetric.from_norm("sqrt(u^2 + v^2)", ["a", "b"], ["u", "v"])
    for y in ([1.0, 0.0], [0.3, -2.0]):
        g, ginv = fundamental_tensor(m, [0.1, 0.2], y)
        np.testing.assert_allclose(g, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(ginv, np.eye(2), atol=1e-14)


def test_diagonal_quadratic_norm():
    m = FinslerMetric.from_norm("sqrt((1 + a^2)*u^2 + exp(b)*v^2)", ["a", "b"], ["u", "v"])
    g, _ = fundamental_tensor(m, [0.5, 0.3], [0.7, -1.1])
    np.testing.assert_allclose(g, np.diag([1.25, np.exp(0.3)]), rtol=1e-14)


def test_quartic_matches_finite_differences():
    m = quartic_factor("Q", ["a", "b"], ["u", "v"]).metric
    x, y = np.array([0.0, 0.0]), np.array([0.8, -0.5])
    g, _ = fundamental_tensor(m, x, y)
    assert np.abs(g - fd_fundamental(m, x, y)).max() < 1e-6


def test_minkowski_spray_vanishes():
    m = quartic_factor("Q", ["a", "b"], ["u", "v"]).metric
    assert np.abs(spray_generic(m, [0.2, 0.3], [1.0, 0.4])).max() < 1e-14
    assert np.abs(berwald_tensors(m, [0.2, 0.3], [1.0, 0.4])["B"]).max() < 1e-12


def test_riemannian_spray_is_half_christoffel_contraction():
    metric = [["1 + a^2", "0.2*a"], ["0.2*a", "2 + sin(b)"]]
    m = riemannian_factor("R", ["a", "b"], ["u", "v"], metric).metric
    spec = make_spec(metric, ["a", "b"])
    x, y = np.array([0.3, -0.2]), np.array([0.9, 0.4])
    G = christoffel(spec, x).lc
    np.testing.assert_allclose(spray_generic(m, x, y), 0.5 * np.einsum("ijk,j,k->i", G, y, y), atol=1e-13)
    assert np.abs(berwald_tensors(m, x, y)["B"]).max() < 1e-12


def test_trivial_twists_and_minkowski_factors():
    base = quartic_factor("B", ["a", "b"], ["u", "v"])
    fib = quartic_factor("F", ["c", "d"], ["w", "z"])
    spec = make_product(base, [fib], ["1"])
    x, y = np.zeros(4), np.array([1.0, 0.2, -0.3, 0.5])
    assert np.abs(spray_structured(spec, x, y)).max() < 1e-14


def test_warped_riemannian_product_matches_christoffels():
    base = riemannian_factor("B", ["s"], ["ys"], [["1"]])
    fib = riemannian_factor("F", ["a"], ["v"], [["1 + a^2"]])
    spec = make_product(base, [fib], ["exp(0.4*s)"])
    chart = make_spec([["1"]], ["s"], [("F", 1, ["a"], [["1 + a^2"]])], ["exp(0.4*s)"])
    x, y = np.array([0.2, 0.3]), np.array([0.7, -0.6])
    G = christoffel(chart, x).lc
    np.testing.assert_allclose(spray_structured(spec, x, y), 0.5 * np.einsum("ijk,j,k->i", G, y, y), atol=1e-13)


@pytest.mark.parametrize("seed", range(8))
def test_structured_spray_matches_generic(seed):
    spec = random_finsler_product(seed)
    for x, y in sample_points(spec, 4, seed):
        a, b = spray_structured(spec, x, y), spray_generic(spec, x, y)
        assert np.abs(a - b).max() <= 1e-6 * max(1.0, np.abs(b).max())


def test_mean_berwald_matches_fd_trace():
    base = riemannian_factor("B", ["s"], ["ys"], [["1"]])
    fib = randers_factor("F", ["a", "b"], ["v", "w"], [["1", "0"], ["0", "1 + a^2"]], ["0.2*a", "0.1"])
    spec = make_product(base, [fib], ["exp(0.3*s + 0.2*a^2)"])
    x, y = np.array([0.1, 0.2, -0.1]), np.array([0.8, 0.5, -0.7])
    bw = berwald_tensors(spec, x, y)
    h = 1e-4
    n = 3
    B_fd = np.zeros((n, n, n, n))
    for l in range(n):
        e = np.eye(n)[l] * h
        B_fd[:, :, :, l] = (berwald_tensors(spec, x, y + e)["G_jk"] - berwald_tensors(spec, x, y - e)["G_jk"]) / (2 * h)
    E_fd = 0.5 * np.einsum("ijki->jk", B_fd)
    assert np.abs(bw["E"] - E_fd).max() < 1e-5
    assert np.abs(bw["E"]).max() > 1e-3


def test_riemannian_product_has_no_cartan_tensor():
    spec = random_finsler_product(2, non_riemannian=False)
    for x, y in sample_points(spec, 3, 0):
        assert np.abs(cartan_tensor(spec, x, y)).max() < 1e-12


def test_cartan_blocks_for_one_non_riemannian_fiber():
    base = riemannian_factor("B", ["s"], ["ys"], [["1"]])
    fib = quartic_factor("F", ["a", "b"], ["v", "w"], ["1 + a^2", "1"])
    spec = make_product(base, [fib], ["exp(0.3*s + 0.2*a^2)"])
    for x, y in sample_points(spec, 3, 1):
        rep = cartan_blocks(spec, x, y)
        assert rep["max_mixed_block"] < 1e-10
        assert rep["max_difference"] < 1e-10
        C = rep["generic"]
        assert np.abs(C[1:, 1:, 1:]).max() > 1e-3 and np.abs(C[0, 0, 0]) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_homogeneity_and_cartan_contraction(seed):
    spec = random_finsler_product(seed)
    m = spec.product_metric
    for x, y in sample_points(spec, 3, seed):
        F = m.norm(x, y)
        g, _ = fundamental_tensor(spec, x, y)
        G = spray_generic(spec, x, y)
        for lam in (2.0, 3.0):
            assert abs(m.norm(x, lam * y) - lam * F) <= 1e-8 * lam * F
            assert np.abs(fundamental_tensor(spec, x, lam * y)[0] - g).max() <= 1e-8 * np.abs(g).max()
            G2 = spray_generic(spec, x, lam * y)
            assert np.abs(G2 - lam**2 * G).max() <= 1e-8 * max(1.0, lam**2 * np.abs(G).max())
        assert np.abs(np.einsum("ijk,k->ij", cartan_tensor(spec, x, y), y)).max() < 1e-9


def test_predicates_riemannian_factors():
    spec = random_finsler_product(1, non_riemannian=False)
    rep = structure_predicates(spec, n=5)
    assert all(v["holds"] for v in rep["cartan"].values())
    assert rep["equivalences"]["riemannian"] == {"product": True, "factors": True, "consistent": True}


def test_predicates_detect_base_dependent_twist_obstruction():
    base = quartic_factor("B", ["s", "r"], ["ys", "yr"], ["1 + s^2", "1"])
    fib = quartic_factor("F", ["a", "b"], ["v", "w"])
    spec = make_product(base, [fib], ["exp(0.4*s)"])
    rep = structure_predicates(spec, n=5)
    assert not rep["berwald_obstruction"]["berwald_obstruction.fiber1"]["holds"]
    assert rep["berwald_obstruction"]["berwald_obstruction.fiber1"]["witness"] is not None
    assert rep["equivalences"]["berwald"]["consistent"]


def test_predicates_locally_minkowski():
    base = quartic_factor("B", ["s", "r"], ["ys", "yr"])
    fib = quartic_factor("F", ["a", "b"], ["v", "w"])
    eq = structure_predicates(make_product(base, [fib], ["1.5"]), n=5)["equivalences"]["locally_minkowski"]
    assert eq["product"] and eq["conditions"] and eq["consistent"]
    # chart-level test: a fiber-dependent twist is detected on both sides
    eq = structure_predicates(make_product(base, [fib], ["1 + 0.3*a^2"]), n=5)["equivalences"]["locally_minkowski"]
    assert not eq["product"] and eq["consistent"]
    tw = make_product(base, [fib], ["1 + 0.3*s^2"])
    eq = structure_predicates(tw, n=5)["equivalences"]["locally_minkowski"]
    assert not eq["product"] and not eq["conditions"]


@pytest.mark.parametrize("seed", range(5))
def test_predicate_equivalences_consistent(seed):
    rep = structure_predicates(random_finsler_product(seed), n=5, seed=seed)
    for name, eq in rep["equivalences"].items():
        assert eq["consistent"], name


def test_load_round_trip_and_errors():
    spec = random_finsler_product(3)
    again = load_finsler(spec.to_dict())
    x, y = sample_points(spec, 1, 0)[0]
    assert np.array_equal(spray_generic(again, x, y), spray_generic(spec, x, y))
    with pytest.raises(SpecError):
        load_finsler({"fibers": []})
    f = make_factor("A", ["a"], ["u"], "sqrt(u^2)")
    with pytest.raises(SpecError):
        make_product(f, [f], ["1"])
