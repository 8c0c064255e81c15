import numpy as np
import pytest

from mtwist.chart import assemble_metric, validate_spec
from mtwist.geodesics import geodesic_integrate
from mtwist.library import (random_finsler_product, random_points, random_spec, random_warp,
                            sinusoidal_fields, static_library, unit_timelike)


@pytest.mark.parametrize("seed", range(10))
def test_random_specs_are_valid_and_bounded(seed):
    for torsion in ("none", "base", "fiber"):
        spec = random_spec(seed, torsion=torsion)
        assert spec.base.dim <= 2 and len(spec.fibers) <= 2 and max(spec.fiber_dims) <= 2
        assert validate_spec(spec, per_axis=2).ok
        assert spec.torsion.location == torsion


def test_random_spec_is_seeded():
    assert random_spec(4).to_dict() == random_spec(4).to_dict()
    assert np.array_equal(random_points(random_spec(4), 3, 1), random_points(random_spec(4), 3, 1))


def test_warp_kinds():
    rng = np.random.default_rng(0)
    assert random_warp(rng, ["t"], ["x"], "exp").startswith("exp(")
    assert "x^2" in random_warp(rng, ["t"], ["x"], "exp_quadratic")
    with pytest.raises(ValueError):
        random_warp(rng, ["t"], ["x"], "sine")
    with pytest.raises(ValueError):
        random_spec(0, torsion="everywhere")


def test_unit_timelike():
    spec = static_library()[0]
    p = np.array([0.0, 0.1, 0.2, 0.0])
    v = unit_timelike(spec, p, [2.0, 0.1, 0.0, 0.3])
    assert abs(v @ assemble_metric(spec, p) @ v + 1) < 1e-14
    with pytest.raises(ValueError):
        unit_timelike(spec, p, [0.0, 1.0, 0.0, 0.0])


def test_sinusoidal_fields_are_admissible():
    spec = static_library()[1]
    p = np.array([0.0, 0.1, 0.2, 0.0])
    c = geodesic_integrate(spec, p, unit_timelike(spec, p, [1.0, 0.2, 0.1, 0.1]), (0, 1), 1e-2)
    for V in sinusoidal_fields(spec, c, count=5, seed=3):
        assert V.vanishes_at_ends
        assert np.abs(V.values[[0, -1]]).max() < 1e-12
        g = np.array([assemble_metric(spec, x) for x in c.points])
        assert np.abs(np.einsum("nab,na,nb->n", g, V.values, c.velocity)).max() < 1e-12


def test_random_finsler_products():
    riem = random_finsler_product(0, non_riemannian=False)
    assert all("^0.25" not in str(f.F) for f in (riem.base, *riem.fibers))
    kinds = {random_finsler_product(s).dim for s in range(10)}
    assert min(kinds) >= 2
