"""Closed-form Einstein and constant-scalar-curvature warps for spacetimes
``-dt^2 + sum phi_i(t)^2 g_i`` carrying the semi-symmetric connection with
torsion vector ``d/dt``.

Every family is instantiated on a concrete chart and measured with the
structured semi-symmetric tensors before being reported.  The measurement is
the authority: families carry ``verified`` and ``max_residual`` fields and
are never dropped for failing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .chart import ProductSpec, make_spec
from .errors import DimensionError, PositivityLoss, PreconditionError
from .expr import Expr, _fmt, parse_expr
from .numerics import Trajectory, integrate_ode
from .oracle import riemann
from .semisym import einstein_residual, ss_scalar

__all__ = [
    "GRWParams", "KasnerParams", "ClosedForm", "NumericWarp", "Family",
    "grw_einstein_solution", "einstein_ode_residual", "grw_einstein_highdim",
    "grw_scalar_solution", "grw_scalar_curvature", "kasner_parameters",
    "kasner_einstein_families", "kasner_scalar_solution", "model_fiber_metric",
    "grw_spec", "kasner_spec", "verification_grid", "scalar_spread", "grw_einstein_family",
    "grw_scalar_family", "kasner_scalar_family", "EINSTEIN_TOL", "SCALAR_TOL",
]

EINSTEIN_TOL = 1e-5
SCALAR_TOL = 1e-5
GRID_POINTS = 21
# below this, a branch discriminant counts as zero
BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class GRWParams:
    l: int
    lam: float
    c1: float = 1.0
    c2: float = 1.0
    t0: float = 0.0
    lam_F: float = 0.0


@dataclass(frozen=True)
class KasnerParams:
    p: tuple[float, ...]
    l: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        object.__setattr__(self, "l", tuple(int(x) for x in self.l))
        if len(self.p) != len(self.l):
            raise DimensionError(f"{len(self.p)} exponents but {len(self.l)} fiber dimensions")

    @property
    def zeta(self) -> float:
        return float(sum(li * pi for pi, li in zip(self.p, self.l)))

    @property
    def eta(self) -> float:
        return float(sum(li * pi * pi for pi, li in zip(self.p, self.l)))


@dataclass(frozen=True)
class ClosedForm:
    """A function of ``t`` given as expression text, tagged with its branch."""

    text: str
    branch: str
    variable: str = "t"

    @property
    def expr(self) -> Expr:
        return _parse(self.text, self.variable)

    def __call__(self, t):
        return np.asarray(self.expr.evaluate({self.variable: np.asarray(t, float)}), float)

    def derivatives(self, t: float) -> tuple[float, float, float]:
        j = self.expr.jet({self.variable: float(t)}, [self.variable], order=2)
        return float(j.v), float(j.d1[0]), float(j.d2[0, 0])

    def __str__(self) -> str:
        return self.text


@lru_cache(maxsize=256)
def _parse(text: str, var: str) -> Expr:
    return parse_expr(text, scope=[var])


@dataclass
class NumericWarp:
    """Numerically integrated warp; used where no closed form exists.

    ``v = w ** power`` where the state of ``trajectory`` is ``(w, w')`` and
    ``accel`` returns ``w''`` from the state.
    """

    trajectory: Trajectory
    power: float
    accel: Callable[[float, float], float]
    branch: str = "numeric"

    def v(self, t):
        return np.asarray(self.trajectory(t))[..., 0] ** self.power

    def derivatives(self, t: float) -> tuple[float, float, float]:
        """Value and first two derivatives of ``v`` at ``t``."""
        w, dw = (float(x) for x in self.trajectory(float(t)))
        ddw = self.accel(w, dw)
        k = self.power
        v = w**k
        dv = k * w ** (k - 1) * dw
        d2v = k * (k - 1) * w ** (k - 2) * dw**2 + k * w ** (k - 1) * ddw
        return v, dv, d2v


@dataclass
class Family:
    family_id: str
    parameters: dict
    warp: ClosedForm | None
    lam: float | None
    fiber_constants: tuple[float, ...] = ()
    verified: bool = False
    max_residual: float = math.nan
    note: str = ""
    spec: ProductSpec | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "family_id": self.family_id,
            "parameters": self.parameters,
            "warp": None if self.warp is None else self.warp.text,
            "branch": None if self.warp is None else self.warp.branch,
            "lambda": self.lam,
            "fiber_constants": list(self.fiber_constants),
            "verified": bool(self.verified),
            "max_residual": float(self.max_residual),
            "note": self.note,
        }


# ---------------------------------------------------------------------------
# text helpers


def _n(x: float) -> str:
    return _fmt(float(x))


def _lincomb(terms) -> str:
    parts = [f"{_n(c)}*{body}" for c, body in terms if c != 0.0]
    return "+".join(parts) if parts else "0"


def _exp(rate: float, var: str = "t") -> str:
    if rate == 0.0:
        return "1"
    return f"exp({_n(rate)}*{var})"


def _second_order_branches(a: float, k: float, c1: float, c2: float, var: str = "t"):
    """General solution of ``y'' - a y' + k y = 0``.

    Returns ``(text, branch)`` with branch ``distinct``, ``repeated`` or
    ``oscillatory`` following the sign of ``a^2 - 4k``.
    """
    disc = a * a - 4 * k
    if abs(disc) <= BRANCH_TOL * max(1.0, a * a):
        e = _exp(a / 2, var)
        return _lincomb([(c1, e), (c2, f"{var}*{e}")]), "repeated"
    if disc > 0:
        r = math.sqrt(disc)
        return _lincomb([(c1, _exp((a + r) / 2, var)), (c2, _exp((a - r) / 2, var))]), "distinct"
    w = math.sqrt(-disc) / 2
    e = _exp(a / 2, var)
    return (_lincomb([(c1, f"{e}*cos({_n(w)}*{var})"), (c2, f"{e}*sin({_n(w)}*{var})")]),
            "oscillatory")


# ---------------------------------------------------------------------------
# concrete charts


def model_fiber_metric(dim: int, einstein_constant: float, coords) -> list[list[str]]:
    """Constant-curvature chart whose Ricci tensor is ``einstein_constant * g``.

    A conformally flat chart of sectional curvature -1 or +1 is measured with
    the oracle at a point near its center; the metric is then scaled so the
    measured ratio becomes the requested constant (Ricci is scale invariant,
    so Ric/g scales inversely with the metric).
    """
    coords = list(coords)
    if len(coords) != dim:
        raise DimensionError("one coordinate name per fiber dimension")
    eye = [["1" if i == j else "0" for j in range(dim)] for i in range(dim)]
    if einstein_constant == 0.0:
        return eye
    if dim == 1:
        raise PreconditionError("a one-dimensional fiber is Ricci flat")
    curv = -1.0 if einstein_constant > 0 else 1.0
    measured = _unit_chart_ratio(dim, curv)
    scale = measured / einstein_constant
    r2 = "+".join(f"{c}^2" for c in coords)
    conf = f"{_n(scale)}/(1+{_n(curv / 4)}*({r2}))^2"
    return [[conf if i == j else "0" for j in range(dim)] for i in range(dim)]


@lru_cache(maxsize=32)
def _unit_chart_ratio(dim: int, curv: float) -> float:
    names = [f"u{i}" for i in range(dim)]
    r2 = "+".join(f"{c}^2" for c in names)
    conf = f"1/(1+{_n(curv / 4)}*({r2}))^2"
    metric = [[conf if i == j else "0" for j in range(dim)] for i in range(dim)]
    spec = make_spec(metric, names)
    cur = riemann(spec, np.full(dim, 0.05), "lc")
    return float(np.trace(np.linalg.solve(cur.metric, cur.ricci)) / dim)


def grw_spec(warp: str, fiber_dim: int, fiber_constant: float = 0.0,
             t_box=(0.0, 1.0), half_width: float = 0.2) -> ProductSpec:
    """``-dt^2 + f(t)^2 g_F`` with torsion vector ``d/dt`` and a model fiber."""
    return kasner_like_spec([warp], [fiber_dim], [fiber_constant], t_box, half_width)


def kasner_like_spec(warps, dims, fiber_constants, t_box=(0.0, 1.0),
                     half_width: float = 0.2) -> ProductSpec:
    fibers, k = [], 0
    for i, (d, lam) in enumerate(zip(dims, fiber_constants)):
        names = [f"x{k + j}" for j in range(d)]
        k += d
        fibers.append((f"F{i + 1}", d, names, model_fiber_metric(d, lam, names)))
    box = [list(map(float, t_box))] + [[-half_width, half_width]] * k
    return make_spec([["-1"]], ["t"], fibers, list(warps), torsion_location="base",
                     torsion_components=["1"], domain_box=box)


def kasner_spec(params: KasnerParams, phi: str, fiber_constants=None, **kw) -> ProductSpec:
    consts = fiber_constants or [0.0] * len(params.l)
    warps = [f"({phi})^{_n(p)}" for p in params.p]
    return kasner_like_spec(warps, params.l, consts, **kw)


def verification_grid(spec: ProductSpec, n: int = GRID_POINTS) -> np.ndarray:
    """``n`` points along the time axis of the box at the spatial center."""
    c = spec.box_center()
    lo, hi = spec.domain_box[0]
    pts = np.repeat(c[None, :], n, axis=0)
    pts[:, 0] = np.linspace(lo, hi, n)
    return pts


def scalar_spread(spec: ProductSpec, n: int = GRID_POINTS) -> tuple[float, float]:
    """Mean and standard deviation of the scalar curvature over the grid."""
    vals = np.array([ss_scalar(spec, q) for q in verification_grid(spec, n)])
    return float(vals.mean()), float(vals.std())


def _verify(fam: Family) -> Family:
    try:
        r = einstein_residual(fam.spec, fam.lam, verification_grid(fam.spec))["max_abs_residual"]
    except PositivityLoss as exc:
        fam.note = (fam.note + "; " if fam.note else "") + str(exc)
        return fam
    fam.max_residual = r
    fam.verified = bool(r < EINSTEIN_TOL)
    return fam


# ---------------------------------------------------------------------------
# one-fiber (GRW) models


def grw_einstein_solution(lam: float, c1: float = 1.0, c2: float = 1.0) -> ClosedForm:
    """Warp of the one-dimensional-fiber Einstein model: ``f'' = f' - lam f``."""
    text, branch = _second_order_branches(1.0, float(lam), c1, c2)
    return ClosedForm(text, branch)


def einstein_ode_residual(f: ClosedForm, lam: float, ts) -> float:
    """``max |f'' - f' + lam f|`` over ``ts``."""
    worst = 0.0
    for t in np.atleast_1d(ts):
        v, d1, d2 = f.derivatives(float(t))
        worst = max(worst, abs(d2 - d1 + lam * v))
    return worst


def grw_einstein_family(lam: float, c1: float = 1.0, c2: float = 1.0, verify: bool = True,
                        t_box=(0.0, 1.0)) -> Family:
    """One-dimensional fiber, Einstein constant ``lam``; the branch follows ``1 - 4 lam``."""
    f = grw_einstein_solution(lam, c1, c2)
    fam = Family("grw-1d", {"l": 1, "c1": c1, "c2": c2}, f, float(lam), (0.0,))
    if verify:
        fam.spec = grw_spec(f.text, 1, 0.0, t_box)
        _verify(fam)
    return fam


def grw_einstein_highdim(l: int, c1: float = 1.0, c2: float = 1.0, verify: bool = True) -> Family:
    """The only Einstein warps for fiber dimension ``l > 1``: ``f = c1 e^t + c2``.

    The fiber must be Einstein with constant ``(l-1) c2^2`` and the total
    Einstein constant is zero.
    """
    if l <= 1:
        raise PreconditionError("fiber dimension must exceed one")
    f = ClosedForm(_lincomb([(c1, "exp(t)"), (c2, "1")]), "exponential-plus-constant")
    lam_F = (l - 1) * c2 * c2
    fam = Family("grw-highdim", {"l": l, "c1": c1, "c2": c2}, f, 0.0, (lam_F,))
    if verify:
        fam.spec = grw_spec(f.text, l, lam_F)
        _verify(fam)
    return fam


def grw_scalar_curvature(l: int, S_F: float, f: float, df: float, d2f: float) -> float:
    """Scalar curvature of the one-fiber model from the warp and its derivatives."""
    return (S_F / f**2 - 2 * l * d2f / f - l * (l - 1) * (df / f) ** 2
            + 2 * l * l * df / f + (1 - l) * l)


def grw_scalar_solution(l: int, S_bar: float, S_F: float = 0.0, c1: float = 1.0, c2: float = 1.0,
                        span=(0.0, 1.0), step: float = 1e-3):
    """Warp squared ``v = f^2`` giving constant scalar curvature ``S_bar``.

    Closed forms exist for ``l == 3`` and for a scalar-flat fiber; the
    returned :class:`ClosedForm` describes ``v``.  Otherwise the nonlinear
    equation for ``w = v^((l+1)/4)`` is integrated from ``w(t0) = c1``,
    ``w'(t0) = c2`` and a :class:`NumericWarp` is returned.
    Raises :class:`PositivityLoss` when ``v`` is not positive on ``span``.
    """
    if l < 1:
        raise PreconditionError("fiber dimension must be positive")
    if l == 3:
        k = 2 + S_bar / 3
        if abs(k) <= BRANCH_TOL:
            text = _lincomb([(c1, "1"), (-S_F / 9, "t"), (c2, "exp(3*t)")])
            sol = ClosedForm(text, "critical")
        else:
            hom, branch = _second_order_branches(3.0, k, c1, c2)
            shift = S_F / (6 + S_bar)
            sol = ClosedForm(hom if shift == 0 else f"{hom}+{_n(shift)}", branch)
        _check_positive(sol, span)
        return sol
    k = (l + 1) / 4 * (l - 1 + S_bar / l)
    if S_F == 0.0:
        hom, branch = _second_order_branches(float(l), k, c1, c2)
        sol = ClosedForm(f"({hom})^{_n(4 / (l + 1))}", branch)
        _check_positive(ClosedForm(hom, branch), span)
        return sol
    src = (l + 1) / 4 * S_F / l
    expo = 1 - 4 / (l + 1)

    def accel(w, dw):
        return l * dw - k * w + src * w**expo

    def rhs(_t, y):
        w, dw = y
        if w <= 0:
            return np.array([np.nan, np.nan])
        return np.array([dw, accel(w, dw)])

    tr = integrate_ode(rhs, [c1, c2], span, step)
    bad = np.nonzero(tr.y[:, 0] <= 0)[0]
    if bad.size or c1 <= 0:
        i = int(bad[0]) if bad.size else 0
        raise PositivityLoss(float(tr.t[i]), float(tr.y[i, 0]))
    return NumericWarp(tr, 4 / (l + 1), accel)


def grw_scalar_family(l: int, S_bar: float, S_F: float = 0.0, c1: float = 1.0, c2: float = 1.0,
                      span=(0.0, 1.0), n: int = GRID_POINTS) -> Family:
    """Constant-scalar one-fiber model, checked on a time grid.

    Closed forms are checked on the full chart with a model fiber of scalar
    curvature ``S_F``; numerically integrated warps are checked through the
    scalar-curvature formula, since no chart expression is available.
    """
    sol = grw_scalar_solution(l, S_bar, S_F, c1, c2, span)
    params = {"l": l, "S_bar": S_bar, "S_F": S_F, "c1": c1, "c2": c2}
    if isinstance(sol, ClosedForm):
        fam = Family(f"grw-scalar-{sol.branch}", params, sol, None, (S_F / l,))
        fam.spec = grw_spec(f"({sol.text})^0.5", l, S_F / l if l > 1 else 0.0, span)
        mean, std = scalar_spread(fam.spec, n)
        fam.max_residual = max(std, abs(mean - S_bar))
    else:
        fam = Family("grw-scalar-numeric", params, None, None, (S_F / l,),
                     note="warp integrated numerically")
        vals = []
        for t in np.linspace(span[0], span[1], n):
            v, dv, d2v = sol.derivatives(t)
            f = math.sqrt(v)
            df = dv / (2 * f)
            d2f = (d2v - 2 * df * df) / (2 * f)
            vals.append(grw_scalar_curvature(l, S_F, f, df, d2f))
        fam.max_residual = float(np.abs(np.array(vals) - S_bar).max())
    fam.verified = bool(fam.max_residual < SCALAR_TOL)
    return fam


def kasner_scalar_family(p, S_bar: float, c0: float = 1.0, c1: float = 1.0, c2: float = 1.0,
                         sign: int = 1, span=(0.0, 1.0), n: int = GRID_POINTS) -> Family:
    """Constant-scalar model on three one-dimensional fibers, checked on a time grid."""
    sol = kasner_scalar_solution(p, S_bar, c0, c1, c2, sign, span)
    kp = KasnerParams(tuple(p), (1, 1, 1))
    params = {"p": list(kp.p), "S_bar": S_bar, "c0": c0, "c1": c1, "c2": c2, "sign": sign,
              "zeta": kp.zeta, "eta": kp.eta}
    phi = sol["phi"]
    fam = Family(f"kasner-scalar-{sol['branch']}", params, phi, None, (0.0, 0.0, 0.0))
    # any positive warp works on the trivial branch; exp(t) stands in for it
    fam.spec = kasner_spec(kp, "exp(t)" if phi is None else phi.text, t_box=span)
    mean, std = scalar_spread(fam.spec, n)
    fam.max_residual = max(std, abs(mean - S_bar))
    fam.verified = bool(fam.max_residual < SCALAR_TOL)
    return fam


def _check_positive(sol: ClosedForm, span, n: int = 401) -> None:
    ts = np.linspace(span[0], span[1], n)
    vals = sol(ts)
    bad = np.nonzero(~(vals > 0))[0]
    if bad.size:
        i = int(bad[0])
        raise PositivityLoss(float(ts[i]), float(vals[i]))


# ---------------------------------------------------------------------------
# generalized Kasner models


def kasner_parameters(p, l) -> dict:
    kp = KasnerParams(tuple(p), tuple(l))
    return {"zeta": kp.zeta, "eta": kp.eta}


def kasner_einstein_families(kind: str, p=None, c0: float = 1.0, verify: bool = True) -> list[Family]:
    """Einstein families for the four-dimensional Kasner types.

    ``kind="II"``: fibers of dimension 1 and 2.  ``p`` optionally gives the
    free exponent of each clause, as ``(p1, p2)`` (defaults ``(1, 1)``).

    ``kind="III"``: three one-dimensional fibers with exponents ``p``, not all
    equal.  The only candidate is ``phi = c0 exp(2t/zeta)`` with ``lam = 0``;
    it is Einstein precisely when ``2 eta = zeta^2``.
    """
    kind = str(kind).upper()
    fams: list[Family] = []
    if kind == "II":
        a, b = (1.0, 1.0) if p is None else map(float, p)
        if a == 0 or b == 0:
            raise PreconditionError("clause exponents must be nonzero")
        rows = [
            ("II-1", (a, 0.0), f"{_n(c0)}*{_exp(1 / a)}", 0.0, (0.0, 1.0)),
            ("II-2", (0.0, b), f"{_n(c0)}*{_exp(1 / b)}", 0.0, (0.0, 0.0)),
            ("II-3", (4 * b, b), f"{_n(c0)}*{_exp(1 / (3 * b))}", 0.0, (0.0, 0.0)),
        ]
        dims = (1, 2)
    elif kind == "III":
        if p is None or len(p) != 3:
            raise PreconditionError("type III needs three exponents")
        p = tuple(float(x) for x in p)
        if max(p) - min(p) == 0:
            raise PreconditionError("all exponents equal: this is the one-fiber case")
        kp = KasnerParams(p, (1, 1, 1))
        rows = [("III", p, f"{_n(c0)}*{_exp(2 / kp.zeta)}", 0.0, (0.0, 0.0, 0.0))]
        dims = (1, 1, 1)
    else:
        raise PreconditionError(f"unknown Kasner type {kind!r}")
    for fid, pp, phi, lam, consts in rows:
        kp = KasnerParams(pp, dims)
        params = {"p": list(pp), "l": list(dims), "c0": c0, "zeta": kp.zeta, "eta": kp.eta}
        fam = Family(fid, params, ClosedForm(phi, fid), lam, consts)
        if kind == "III" and abs(2 * kp.eta - kp.zeta**2) > 1e-12 * max(1.0, kp.zeta**2):
            fam.note = "2*eta != zeta^2: no Einstein structure expected"
        if verify:
            fam.spec = kasner_spec(kp, phi, list(consts))
            _verify(fam)
        fams.append(fam)
    return fams


def kasner_scalar_solution(p, S_bar: float, c0: float = 1.0, c1: float = 1.0, c2: float = 1.0,
                           sign: int = 1, span=(0.0, 1.0)) -> dict:
    """Warp ``phi`` giving constant scalar curvature on three one-dimensional fibers.

    Returns ``{"branch", "phi", "scalar"}``; ``phi`` is None when any
    warp works (all exponents zero, scalar fixed at -6).
    """
    kp = KasnerParams(tuple(p), (1, 1, 1))
    z, e = kp.zeta, kp.eta
    if z == 0 and e == 0:
        if abs(S_bar + 6) > 1e-12:
            raise PreconditionError("with all exponents zero the scalar curvature is -6")
        return {"branch": "trivial", "phi": None, "scalar": -6.0}
    if z == 0:
        s = S_bar + 6
        if s > 0:
            raise PreconditionError("no warp: S_bar + 6 > 0 with zeta = 0")
        if s == 0:
            return {"branch": "constant", "phi": ClosedForm(_n(c0), "constant"), "scalar": S_bar}
        rate = math.copysign(math.sqrt(-s / e), sign)
        return {"branch": "exponential", "phi": ClosedForm(f"{_n(c0)}*{_exp(rate)}", "exponential"),
                "scalar": S_bar}
    k = (S_bar + 6) * (e + z * z) / (4 * z * z)
    psi_text, branch = _second_order_branches(3.0, k, c1, c2)
    psi = ClosedForm(psi_text, branch)
    _check_positive(psi, span)
    phi = ClosedForm(f"({psi_text})^{_n(2 * z / (e + z * z))}", branch)
    return {"branch": branch, "phi": phi, "psi": psi, "scalar": S_bar}
