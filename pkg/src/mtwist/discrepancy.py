"""Printed-formula discrepancies, re-measured on demand, and the
structured-versus-oracle sweep that detects new ones."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .chart import ProductSpec, make_spec
from .geodesics import geodesic_rhs, static_geodesic_rhs
from .killing import (killing_residual, linear_warp_family, non_rotating_family,
                      non_rotating_family_printed)
from .oracle import riemann
from .semisym import ss_curvature_tensor, ss_ricci_tensor, ss_scalar
from .twisted import context, lc_curvature_tensor, lc_ricci_tensor, lc_scalar

__all__ = ["FormulaDiscrepancy", "known_discrepancies", "structured_vs_oracle"]


@dataclass
class FormulaDiscrepancy:
    name: str
    description: str
    printed_residual: float
    corrected_residual: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def confirmed(self) -> bool:
        """The printed form fails and the corrected form passes."""
        return self.printed_residual > self.tolerance >= self.corrected_residual

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confirmed"] = self.confirmed
        return d


def _static_time_sign() -> FormulaDiscrepancy:
    spec = make_spec([["-1"]], ["u"],
                     [("X", 1, ["x"], [["1"]]), ("F", 2, ["y", "z"], [["1", "0"], ["0", "1+y^2"]])],
                     ["exp(0.3*u+0.2*x^2)", "2+u^2"])
    state = np.array([0.4, 0.3, 0.1, 0.2, 1.3, 0.5, 0.4, -0.3])
    ref = geodesic_rhs(spec, "oracle")(0.0, state)
    printed = static_geodesic_rhs(spec, printed=True)(0.0, state)
    derived = static_geodesic_rhs(spec)(0.0, state)
    return FormulaDiscrepancy(
        "static geodesic time equation sign",
        "The time equation of the static geodesic system needs the opposite sign on its "
        "warp-derivative terms for a -du^2 base.",
        float(np.abs(printed - ref).max()), float(np.abs(derived - ref).max()), 1e-10,
        {"state": state.tolist()})


def _linear_warp_constant() -> FormulaDiscrepancy:
    A, B = 0.5, 2.0
    good = linear_warp_family(A, B)
    bad = linear_warp_family(A, B, lam=-B / A)
    rb = killing_residual(bad.spec, bad.field, per_axis=5)["max_abs"]
    rg = killing_residual(good.spec, good.field, per_axis=5)["max_abs"]
    return FormulaDiscrepancy(
        "linear-warp Killing field constant sign",
        "For warp A t + B the time-shift constant must be B/A; the value -B/A produced by "
        "the derivation is not Killing.",
        float(rb), float(rg), 1e-6, {"A": A, "B": B})


def _non_rotating_denominator(r0: float = 1.0, sign: float = 1.0) -> FormulaDiscrepancy:
    good = non_rotating_family(r0=r0, sign=sign)
    bad = non_rotating_family_printed(r0=r0, sign=sign)
    rb = killing_residual(bad.spec, bad.field, per_axis=5)["max_abs"]
    rg = killing_residual(good.spec, good.field, per_axis=5)["max_abs"]
    return FormulaDiscrepancy(
        "non-rotating Killing field fiber denominator",
        "The fiber part grad(mu)/(f1 C t + r0) is Killing only for r0 = 0; the field "
        "-f1/(f f') grad(mu) works for every offset and sign.",
        float(rb), float(rg), 1e-6, {"r0": r0, "sign": sign})


def _sphere_scalar_sign() -> FormulaDiscrepancy:
    spec = make_spec([["1", "0"], ["0", "sin(th)^2"]], ["th", "ph"], domain_box=[[1.0, 2.0], [0.0, 1.0]])
    S = riemann(spec, np.array([1.2, 0.3]), "lc").scalar
    return FormulaDiscrepancy(
        "round-sphere scalar curvature sign",
        "With Ric(X,Y) = sum eps g(R(X,E)Y,E) and R = [D_X, D_Y] - D_[X,Y], the unit sphere "
        "has scalar curvature -2, not +2.",
        float(abs(S - 2.0)), float(abs(S + 2.0)), 1e-8, {"measured_scalar": float(S)})


def _twisted_fiber_curvature_reading() -> FormulaDiscrepancy:
    spec = make_spec([["-1"]], ["t"], [("F", 2, ["x", "y"], [["1", "0"], ["0", "1+x^2"]])],
                     ["exp(0.4*t + 0.3*x*y + 0.2*t*x)"])
    p = np.array([0.3, 0.2, -0.4])
    ref = riemann(spec, p, "lc").scalar
    literal = lc_scalar(spec, p, ctx=context(spec, p, leaf=False))
    leaf = lc_scalar(spec, p)
    return FormulaDiscrepancy(
        "twisted fiber curvature reading",
        "For twisting functions the fiber curvature terms must be those of the leaf metric "
        "b^2 g_F at fixed base point; the curvature of g_F alone does not match.",
        float(abs(literal - ref)), float(abs(leaf - ref)), 1e-8, {"point": p.tolist()})


_REGISTRY = {
    "curvature": [_sphere_scalar_sign, _twisted_fiber_curvature_reading],
    "geodesic": [_static_time_sign],
    "killing": [_linear_warp_constant, lambda: _non_rotating_denominator(1.0, 1.0),
                lambda: _non_rotating_denominator(2.0, -1.0)],
}


def known_discrepancies(topics=None) -> list[FormulaDiscrepancy]:
    """Re-measure every catalogued printed-versus-derived mismatch.

    ``topics`` restricts the list to some of ``curvature``, ``geodesic`` and
    ``killing``.
    """
    keys = list(_REGISTRY) if topics is None else list(topics)
    unknown = [k for k in keys if k not in _REGISTRY]
    if unknown:
        raise ValueError(f"unknown discrepancy topics {unknown}")
    return [build() for k in keys for build in _REGISTRY[k]]


# ---------------------------------------------------------------------------


def _rel(a: np.ndarray, b: np.ndarray, floor: float) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(float(np.abs(b).max()), floor)
    return float(np.abs(a - b).max() / scale)


def structured_vs_oracle(spec: ProductSpec, points, connection: str = "lc",
                         tol: float = 1e-6, abs_floor: float = 1e-2) -> dict:
    """Compare structured curvature, Ricci and scalar against the oracle.

    Differences are relative to the largest oracle component, with the scale
    floored at ``abs_floor`` so near-zero tensors are compared absolutely.
    """
    rows = []
    worst = {"curvature": 0.0, "ricci": 0.0, "scalar": 0.0}
    for p in np.atleast_2d(np.asarray(points, float)):
        ora = riemann(spec, p, connection)
        if connection == "lc":
            R, ric, S = lc_curvature_tensor(spec, p), lc_ricci_tensor(spec, p), lc_scalar(spec, p)
        else:
            R, ric, S = ss_curvature_tensor(spec, p), ss_ricci_tensor(spec, p), ss_scalar(spec, p)
        d = {
            "curvature": _rel(R, ora.riemann, abs_floor),
            "ricci": _rel(ric, ora.ricci, abs_floor),
            "scalar": _rel(S, ora.scalar, abs_floor),
        }
        for k in worst:
            worst[k] = max(worst[k], d[k])
        rows.append({"point": p.tolist(), **d})
    flags = [k for k, v in worst.items() if v > tol]
    return {"connection": connection, "tolerance": tol, "points": rows, "max": worst,
            "discrepancies": flags, "ok": not flags}
