import math

import numpy as np
import pytest

from mtwist.chart import make_spec, sample_grid
from mtwist.einstein import (KasnerParams, einstein_ode_residual, grw_einstein_family,
                             grw_einstein_highdim, grw_einstein_solution, grw_scalar_family,
                             grw_scalar_solution, grw_spec, kasner_einstein_families,
                             kasner_parameters, kasner_scalar_family, kasner_scalar_solution,
                             model_fiber_metric, verification_grid)
from mtwist.errors import DimensionError, PositivityLoss, PreconditionError
from mtwist.oracle import riemann
from mtwist.semisym import einstein_residual

TS = np.linspace(0, 1, 21)


def test_zero_constant_gives_exponential_plus_constant():
    f = grw_einstein_solution(0.0)
    assert f.branch == "distinct"
    assert np.allclose(f(TS), np.exp(TS) + 1, rtol=1e-15)
    assert einstein_ode_residual(f, 0.0, TS) < 1e-12


def test_quarter_constant_gives_repeated_root():
    f = grw_einstein_solution(0.25, 2.0, 3.0)
    assert f.branch == "repeated"
    assert np.allclose(f(TS), 2 * np.exp(TS / 2) + 3 * TS * np.exp(TS / 2), rtol=1e-14)


def test_half_constant_is_oscillatory():
    f = grw_einstein_solution(0.5)
    assert f.branch == "oscillatory"
    assert einstein_ode_residual(f, 0.5, TS) < 1e-9


@pytest.mark.parametrize("lo,hi", [(-3.0, 0.24), (0.26, 3.0)])
def test_random_constants_solve_the_ode(lo, hi):
    rng = np.random.default_rng(11)
    for lam in rng.uniform(lo, hi, 20):
        c1, c2 = rng.uniform(0.2, 2.0, 2)
        f = grw_einstein_solution(float(lam), float(c1), float(c2))
        assert einstein_ode_residual(f, float(lam), TS) < 1e-9


@pytest.mark.parametrize("lam", [0.0, 0.25, 0.1, -2.0])
def test_one_dimensional_fiber_families_verify(lam):
    fam = grw_einstein_family(lam)
    assert fam.verified and fam.max_residual < 1e-5


def test_highdim_flat_fiber():
    fam = grw_einstein_highdim(2, c1=1.0, c2=0.0)
    assert fam.fiber_constants == (0.0,) and fam.lam == 0.0
    assert fam.verified and fam.max_residual < 1e-6


def test_highdim_curved_model_fiber():
    fam = grw_einstein_highdim(2, c1=1.0, c2=1.0)
    assert fam.fiber_constants == (1.0,)
    assert fam.verified and fam.max_residual < 1e-5


def test_highdim_needs_curved_fiber():
    spec = grw_spec("exp(t)+1", 2, 0.0)
    assert einstein_residual(spec, 0.0, verification_grid(spec))["max_abs_residual"] > 0.1


def test_highdim_precondition():
    with pytest.raises(PreconditionError):
        grw_einstein_highdim(1)


def test_model_fiber_has_requested_ricci():
    for dim, lam in [(2, 1.0), (3, 2.0), (2, -0.5)]:
        names = [f"u{i}" for i in range(dim)]
        spec = make_spec(model_fiber_metric(dim, lam, names), names, domain_box=[[-0.2, 0.2]] * dim)
        for p in sample_grid(spec.domain_box, 2):
            cur = riemann(spec, p)
            np.testing.assert_allclose(cur.ricci, lam * cur.metric, atol=1e-7)


def test_fiber_scalar_is_constant_on_family_charts():
    fam = grw_einstein_highdim(3, c1=1.0, c2=1.0)
    names = [f"x{i}" for i in range(3)]
    spec = make_spec(model_fiber_metric(3, 2.0, names), names, domain_box=[[-0.2, 0.2]] * 3)
    vals = [riemann(spec, p).scalar for p in sample_grid(spec.domain_box, 3)]
    assert max(vals) - min(vals) < 1e-6
    assert fam.verified


def test_critical_three_dimensional_scalar_branch():
    sol = grw_scalar_solution(3, -6.0, S_F=0.9, c1=1.0, c2=1.0)
    assert sol.branch == "critical"
    assert np.allclose(sol(TS), 1 - 0.1 * TS + np.exp(3 * TS), rtol=1e-14)
    fam = grw_scalar_family(3, -6.0, 0.9)
    assert fam.verified


def test_three_dimensional_repeated_scalar_branch():
    sol = grw_scalar_solution(3, 0.75, S_F=1.35)
    assert sol.branch == "repeated"
    want = np.exp(1.5 * TS) + TS * np.exp(1.5 * TS) + 1.35 / 6.75
    assert np.allclose(sol(TS), want, rtol=1e-14)
    assert grw_scalar_family(3, 0.75, 1.35).verified


def test_two_dimensional_scalar_flat_fiber():
    sol = grw_scalar_solution(2, 0.0)
    # w'' - 2w' + (3/4) w = 0 has rates 3/2 and 1/2
    assert "exp(1.5*t)" in sol.text and "exp(0.5*t)" in sol.text
    fam = grw_scalar_family(2, 0.0)
    assert fam.verified and fam.max_residual < 1e-5


def test_numeric_scalar_branch():
    fam = grw_scalar_family(2, -1.0, S_F=0.5)
    assert fam.warp is None and fam.verified


def test_scalar_positivity_loss():
    with pytest.raises(PositivityLoss):
        grw_scalar_solution(3, -6.5, S_F=0.0, c1=1.0, c2=-1.0, span=(0.0, 2.0))


def test_kasner_parameters():
    assert kasner_parameters((1, 1), (1, 2)) == {"zeta": 3.0, "eta": 3.0}
    z = kasner_parameters((4, 1), (1, 2))
    assert z == {"zeta": 6.0, "eta": 18.0} and 2 * z["eta"] == z["zeta"] ** 2
    assert kasner_parameters((0, 0), (1, 2)) == {"zeta": 0.0, "eta": 0.0}
    with pytest.raises(DimensionError):
        KasnerParams((1, 2), (1,))


def test_type_two_families():
    fams = {f.family_id: f for f in kasner_einstein_families("II")}
    assert set(fams) == {"II-1", "II-2", "II-3"}
    assert fams["II-1"].fiber_constants == (0.0, 1.0) and fams["II-1"].lam == 0.0
    assert fams["II-3"].parameters["p"] == [4.0, 1.0]
    for f in fams.values():
        assert math.isfinite(f.max_residual)


def test_type_three_families():
    (ok,) = kasner_einstein_families("III", (1, 1, 0))
    assert ok.parameters["zeta"] == 2.0 and ok.parameters["eta"] == 2.0
    assert ok.verified
    (flagged,) = kasner_einstein_families("III", (2, 0, 0))
    assert not flagged.verified and "2*eta != zeta^2" in flagged.note
    with pytest.raises(PreconditionError):
        kasner_einstein_families("III", (1, 1, 1))


def test_kasner_scalar_trivial_and_zeta_zero_branches():
    assert kasner_scalar_solution((0, 0, 0), -6.0) == {"branch": "trivial", "phi": None, "scalar": -6.0}
    sol = kasner_scalar_solution((1, -1, 0), -8.0)
    assert sol["branch"] == "exponential"
    assert np.allclose(sol["phi"](TS), np.exp(1.0 * TS), rtol=1e-14)  # sqrt(2 / eta) = 1
    for p, S in [((0, 0, 0), -6.0), ((1, -1, 0), -8.0)]:
        assert kasner_scalar_family(p, S).verified


def test_kasner_scalar_repeated_branch():
    kp = KasnerParams((1, 4, 1), (1, 1, 1))
    z, e = kp.zeta, kp.eta
    S = 9 * z * z / (e + z * z) - 6
    sol = kasner_scalar_solution(kp.p, S)
    assert sol["branch"] == "repeated"
    assert np.allclose(sol["psi"](TS), np.exp(1.5 * TS) + TS * np.exp(1.5 * TS), rtol=1e-13)
    assert kasner_scalar_family(kp.p, S).verified
