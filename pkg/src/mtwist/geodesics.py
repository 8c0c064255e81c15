"""Geodesics, covariant derivatives along curves, index form and second variation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .chart import ProductSpec
from .errors import PreconditionError, PositivityLoss, VariationLeavesTimelikeCone
from .numerics import integrate_ode, quad
from .oracle import MetricField, _dgamma, _gamma, metric_field, riemann_from_gamma
from .twisted import _factor_specs

__all__ = [
    "CurveSegment", "VariationField", "geodesic_integrate", "geodesic_rhs", "static_geodesic_rhs",
    "covariant_derivative_along", "covariant_derivative_along_oracle", "index_form",
    "index_form_bilinear", "static_index_form", "second_variation_fd", "boundary_term",
    "unit_parametrize", "read_curve_csv", "write_curve_csv", "read_variation_csv",
    "write_variation_csv", "PANELS_PER_UNIT",
]

PANELS_PER_UNIT = 2000
UNIT_TOL = 1e-6
RENORMALIZE_TOL = 1e-3


def _hermite(t, y, dy, s):
    s = np.asarray(s, float)
    idx = np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2)
    t0 = t[idx]
    h = t[idx + 1] - t0
    u = (s - t0) / h
    u, h = u[..., None], h[..., None]
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    return h00 * y[idx] + h10 * h * dy[idx] + h01 * y[idx + 1] + h11 * h * dy[idx + 1]


@dataclass
class CurveSegment:
    """Sampled curve with velocities; cubic Hermite interpolation between samples."""

    t: np.ndarray
    points: np.ndarray
    velocity: np.ndarray
    accel: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        self.points = np.asarray(self.points, float)
        self.velocity = np.asarray(self.velocity, float)
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(self.velocity)):
            raise ValueError("velocity must be finite at every sample")
        if self.accel is None:
            self.accel = CubicSpline(self.t, self.velocity, axis=0)(self.t, 1)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def position(self, s):
        return _hermite(self.t, self.points, self.velocity, s)

    def tangent(self, s):
        return _hermite(self.t, self.velocity, self.accel, s)

    def check_time(self, s):
        a, b = self.span
        s = np.asarray(s, float)
        if np.any(s < a - 1e-12) or np.any(s > b + 1e-12):
            raise ValueError(f"time outside curve span [{a}, {b}]")


@dataclass
class VariationField:
    """Vector field along a curve given by coordinate components at the curve samples.

    ``derivative`` holds d/dt of the components; when omitted a cubic spline
    through the samples supplies it.
    """

    t: np.ndarray
    values: np.ndarray
    derivative: np.ndarray | None = None
    vanishes_at_ends: bool = False
    _spl: CubicSpline | None = field(default=None, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        self.values = np.asarray(self.values, float)
        if self.derivative is None:
            self._spl = CubicSpline(self.t, self.values, axis=0)
            self.derivative = self._spl(self.t, 1)
        self.derivative = np.asarray(self.derivative, float)

    @classmethod
    def from_function(cls, curve: CurveSegment, fn, dfn=None, **kw) -> "VariationField":
        vals = np.array([fn(s) for s in curve.t], float)
        der = None if dfn is None else np.array([dfn(s) for s in curve.t], float)
        return cls(curve.t, vals, der, **kw)

    def __call__(self, s):
        return _hermite(self.t, self.values, self.derivative, s)

    def rate(self, s):
        """Coordinate time derivative at ``s``."""
        if self._spl is not None:
            return self._spl(np.asarray(s, float), 1)
        second = CubicSpline(self.t, self.derivative, axis=0)(self.t, 1)
        return _hermite(self.t, self.derivative, second, s)

    def __add__(self, o: "VariationField") -> "VariationField":
        return VariationField(self.t, self.values + o.values, self.derivative + o.derivative,
                              self.vanishes_at_ends and o.vanishes_at_ends)

    def scaled(self, c: float) -> "VariationField":
        return VariationField(self.t, c * self.values, c * self.derivative, self.vanishes_at_ends)


# ---------------------------------------------------------------------------
# factor data evaluated in batches


class _Factors:
    def __init__(self, spec: ProductSpec):
        self.spec = spec
        base, fibers = _factor_specs(spec)
        self.base = metric_field(base)
        self.fibers = [metric_field(f) for f in fibers]
        self.slices = spec.block_slices()

    @staticmethod
    def geometry(mf: MetricField, x, order: int = 1):
        g, dg, d2g = mf.jets(x, order=max(order, 1))
        ginv = np.linalg.inv(g)
        G = _gamma(ginv, dg)
        if order < 2:
            return g, ginv, G, None
        return g, ginv, G, riemann_from_gamma(G, _dgamma(ginv, dg, d2g))

    def warp(self, i: int, p, order: int = 1):
        spec = self.spec
        names = list(spec.base.coords) + list(spec.fibers[i].coords)
        env = spec.env(p)
        j = spec.warp(i).jet(env, names, order=order)
        n = spec.base.dim
        b = np.broadcast_to(j.v, np.shape(p)[:-1]).astype(float)
        if np.any(b <= 0):
            k = np.unravel_index(np.argmin(b), b.shape) if b.ndim else ()
            raise PositivityLoss(float(np.asarray(p)[k][0]) if b.ndim else float(p[0]), float(b[k]))
        d1 = j.gradient
        out = [b, d1[..., :n], d1[..., n:]]
        if order >= 2:
            d2 = j.hessian
            out += [d2[..., :n, :n], d2[..., :n, n:], d2[..., n:, n:]]
        return out


def geodesic_rhs(spec: ProductSpec, method: str = "structured"):
    """Right-hand side ``y = (x, v) -> (v, a)`` acting on arrays of shape (..., 2 nbar)."""
    nbar = spec.dim
    if method == "oracle":
        mf = metric_field(spec)

        def rhs_oracle(_t, y):
            x, v = y[..., :nbar], y[..., nbar:]
            g, dg, _ = mf.jets(x, order=1)
            G = _gamma(np.linalg.inv(g), dg)
            return np.concatenate([v, -np.einsum("...kij,...i,...j->...k", G, v, v)], axis=-1)

        return rhs_oracle
    if method != "structured":
        raise ValueError(f"unknown method {method!r}")
    fac = _Factors(spec)
    sl = fac.slices

    def rhs(_t, y):
        x, v = y[..., :nbar], y[..., nbar:]
        a = np.zeros_like(v)
        xb, vb = x[..., sl[0]], v[..., sl[0]]
        _, ginvB, GB, _ = fac.geometry(fac.base, xb)
        aB = -np.einsum("...kij,...i,...j->...k", GB, vb, vb)
        for i, mfF in enumerate(fac.fibers):
            s = sl[i + 1]
            xf, vf = x[..., s], v[..., s]
            gF, ginvF, GF, _ = fac.geometry(mfF, xf)
            b, dB, dF = fac.warp(i, x)
            vv = np.einsum("...ab,...a,...b->...", gF, vf, vf)
            aB = aB + (b * vv)[..., None] * np.einsum("...ab,...b->...a", ginvB, dB)
            alpha_b = np.einsum("...a,...a->...", vb, dB) / b
            beta_ln = np.einsum("...a,...a->...", vf, dF) / b
            aF = (-np.einsum("...kij,...i,...j->...k", GF, vf, vf)
                  - 2 * (alpha_b + beta_ln)[..., None] * vf
                  + (vv / b)[..., None] * np.einsum("...ab,...b->...a", ginvF, dF))
            a[..., s] = aF
        a[..., sl[0]] = aB
        return np.concatenate([v, a], axis=-1)

    return rhs


def static_geodesic_rhs(spec: ProductSpec, printed: bool = False):
    """Geodesic system for ``-du^2 + f1(u, x)^2 dx^2 + f2(u)^2 g_F``.

    State is ``(u, x, q, u', x', q')``.  With ``printed=True`` the time
    equation uses the opposite sign on its curvature terms, which does not
    produce geodesics on a Lorentzian base; it is kept for comparison.
    """
    if spec.base.dim != 1 or len(spec.fibers) != 2 or spec.fibers[0].dim != 1:
        raise PreconditionError("static form needs a 1D base, a 1D first fiber and a second fiber")
    nbar = spec.dim
    fac = _Factors(spec)
    sign = -1.0 if printed else 1.0

    def rhs(_t, y):
        x, v = y[..., :nbar], y[..., nbar:]
        tau1, taux = v[..., 0], v[..., 1]
        q1 = v[..., 2:]
        f1, f1u, f1x = fac.warp(0, x)
        f2, f2u, _ = fac.warp(1, x)
        f1u, f1x, f2u = f1u[..., 0], f1x[..., 0], f2u[..., 0]
        gF, _, GF, _ = fac.geometry(fac.fibers[1], x[..., 2:])
        qq = np.einsum("...ab,...a,...b->...", gF, q1, q1)
        # derivatives of the squared warps
        df1u, df1x, df2u = 2 * f1 * f1u, 2 * f1 * f1x, 2 * f2 * f2u
        a = np.empty_like(v)
        a[..., 0] = -sign * (0.5 * taux**2 * df1u + 0.5 * df2u * qq)
        a[..., 1] = -(df1u * tau1 * taux + 0.5 * df1x * taux**2) / f1**2
        a[..., 2:] = (-(df2u / f2**2 * tau1)[..., None] * q1
                      - np.einsum("...kij,...i,...j->...k", GF, q1, q1))
        return np.concatenate([v, a], axis=-1)

    return rhs


def geodesic_integrate(spec: ProductSpec, p0, v0, t_span=(0.0, 1.0), step: float = 1e-3,
                       method: str = "structured", rhs=None):
    """Integrate one geodesic (1D ``p0``) or a batch (2D ``p0``) with RK4.

    Returns a :class:`CurveSegment`, or a list of them for batched input.
    """
    p0 = np.asarray(p0, float)
    v0 = np.asarray(v0, float)
    f = rhs if rhs is not None else geodesic_rhs(spec, method)
    traj = integrate_ode(f, np.concatenate([p0, v0], axis=-1), t_span, step)
    nbar = p0.shape[-1]

    def seg(y, dy):
        return CurveSegment(traj.t, y[:, :nbar], y[:, nbar:], dy[:, nbar:])

    if p0.ndim == 1:
        return seg(traj.y, traj.dy)
    return [seg(traj.y[:, k], traj.dy[:, k]) for k in range(p0.shape[0])]


# ---------------------------------------------------------------------------
# covariant derivative along a curve


def covariant_derivative_along(spec: ProductSpec, curve: CurveSegment, V: VariationField, t):
    """Covariant derivative of ``V`` along ``curve`` assembled block by block."""
    curve.check_time(t)
    fac = _Factors(spec)
    sl = fac.slices
    x, xd = curve.position(t), curve.tangent(t)
    v, vd = V(t), V.rate(t)
    out = np.zeros_like(v)
    xb, ab, VB = x[..., sl[0]], xd[..., sl[0]], v[..., sl[0]]
    _, ginvB, GB, _ = fac.geometry(fac.base, xb)
    base = vd[..., sl[0]] + np.einsum("...kij,...i,...j->...k", GB, ab, VB)
    for i, mfF in enumerate(fac.fibers):
        s = sl[i + 1]
        gF, ginvF, GF, _ = fac.geometry(mfF, x[..., s])
        b, dB, dF = fac.warp(i, x)
        beta, Vi = xd[..., s], v[..., s]
        gbv = np.einsum("...ab,...a,...b->...", gF, beta, Vi)
        base = base - (b * gbv)[..., None] * np.einsum("...ab,...b->...a", ginvB, dB)
        dot = lambda a, d: np.einsum("...a,...a->...", a, d)[..., None]  # noqa: E731
        fib = (dot(ab, dB) / b[..., None] * Vi + dot(VB, dB) / b[..., None] * beta
               + dot(beta, dF) / b[..., None] * Vi + dot(Vi, dF) / b[..., None] * beta
               - (gbv / b)[..., None] * np.einsum("...ab,...b->...a", ginvF, dF)
               + vd[..., s] + np.einsum("...kij,...i,...j->...k", GF, beta, Vi))
        out[..., s] = fib
    out[..., sl[0]] = base
    return out


def covariant_derivative_along_oracle(spec: ProductSpec, curve: CurveSegment, V: VariationField, t):
    curve.check_time(t)
    x, xd = curve.position(t), curve.tangent(t)
    g, dg, _ = metric_field(spec).jets(x, order=1)
    G = _gamma(np.linalg.inv(g), dg)
    return V.rate(t) + np.einsum("...kij,...i,...j->...k", G, xd, V(t))


# ---------------------------------------------------------------------------
# index form


def _nodes(curve: CurveSegment, panels_per_unit: int):
    a, b = curve.span
    n = max(2, int(np.ceil((b - a) * panels_per_unit)))
    n += n % 2
    return a, b, n


def unit_parametrize(curve: CurveSegment, spec: ProductSpec, tol: float = UNIT_TOL,
                     renorm_tol: float = RENORMALIZE_TOL) -> tuple[CurveSegment, float]:
    """Return a unit-speed timelike reparametrisation and the measured ``g(v, v)``.

    Curves within ``tol`` of unit speed are returned unchanged.  Curves within
    ``renorm_tol`` are rescaled affinely; anything worse is rejected.
    """
    g = metric_field(spec).value(curve.points)
    norms = np.einsum("nab,na,nb->n", g, curve.velocity, curve.velocity)
    worst = float(norms[np.argmax(np.abs(norms + 1))])
    dev = abs(worst + 1)
    if dev < tol:
        return curve, worst
    if dev >= renorm_tol or np.any(norms >= 0):
        raise PreconditionError(f"curve is not unit timelike: g(v, v) = {worst!r}")
    c = float(np.sqrt(-np.mean(norms)))
    t0 = curve.t[0]
    return CurveSegment(t0 + (curve.t - t0) * c, curve.points, curve.velocity / c,
                        curve.accel / c**2), worst


def _rescale_field(V: VariationField, curve: CurveSegment, new: CurveSegment) -> VariationField:
    if new is curve:
        return V
    c = (new.t[-1] - new.t[0]) / (curve.t[-1] - curve.t[0])
    return VariationField(new.t, V.values, V.derivative / c, V.vanishes_at_ends)


def _check_perpendicular(spec, curve, V, tol=1e-6):
    g = metric_field(spec).value(curve.points)
    gv = np.einsum("nab,na,nb->n", g, V.values, curve.velocity)
    if np.max(np.abs(gv)) > tol * max(1.0, float(np.abs(V.values).max())):
        raise PreconditionError(f"variation field not perpendicular to the curve: max |g(V, v)| = {np.abs(gv).max()!r}")
    if np.abs(V.values[0]).max() > tol or np.abs(V.values[-1]).max() > tol:
        raise PreconditionError("variation field does not vanish at the endpoints")


def _integrand(spec: ProductSpec, curve: CurveSegment, V: VariationField, s) -> np.ndarray:
    fac = _Factors(spec)
    sl = fac.slices
    x, xd = curve.position(s), curve.tangent(s)
    v, vd = V(s), V.rate(s)
    xb, ab, VB = x[..., sl[0]], xd[..., sl[0]], v[..., sl[0]]
    gB, _, GB, RB = fac.geometry(fac.base, xb, order=2)
    DVB = vd[..., sl[0]] + np.einsum("...kij,...i,...j->...k", GB, ab, VB)

    def q(g, a, b):
        return np.einsum("...ab,...a,...b->...", g, a, b)

    val = q(gB, DVB, DVB) - q(gB, np.einsum("...lijk,...i,...j,...k->...l", RB, VB, ab, ab), VB)
    for i, mfF in enumerate(fac.fibers):
        s_ = sl[i + 1]
        gF, _, GF, RF = fac.geometry(mfF, x[..., s_], order=2)
        beta, Vi = xd[..., s_], v[..., s_]
        DVF = vd[..., s_] + np.einsum("...kij,...i,...j->...k", GF, beta, Vi)
        b, dB, dF, HBB, HBF, HFF = fac.warp(i, x, order=2)
        # jets of b^2
        d2B = 2 * (b[..., None, None] * HBB + dB[..., :, None] * dB[..., None, :])
        d2F = 2 * (b[..., None, None] * HFF + dF[..., :, None] * dF[..., None, :])
        d2BF = 2 * (b[..., None, None] * HBF + dB[..., :, None] * dF[..., None, :])
        hessB = d2B - np.einsum("...cab,...c->...ab", GB, 2 * b[..., None] * dB)
        hessF = d2F - np.einsum("...cab,...c->...ab", GF, 2 * b[..., None] * dF)
        bb = q(gF, beta, beta)
        curv = q(gF, np.einsum("...lijk,...i,...j,...k->...l", RF, Vi, beta, beta), Vi)
        val = val + b**2 * (q(gF, DVF, DVF) - curv)
        val = val + 0.5 * (q(hessB, VB, VB) + q(hessF, Vi, Vi) + 2 * q(d2BF, VB, Vi)) * bb
        dir_b2 = 2 * b * (np.einsum("...a,...a->...", VB, dB) + np.einsum("...a,...a->...", Vi, dF))
        val = val + 2 * dir_b2 * q(gF, DVF, beta)
    return val


def index_form(spec: ProductSpec, geodesic: CurveSegment, V: VariationField,
               W: VariationField | None = None, panels_per_unit: int = PANELS_PER_UNIT,
               check: bool = True) -> float:
    """Index form ``I(V, W)`` along a unit timelike geodesic; ``I(V, V)`` when ``W`` is omitted.

    The quadratic form is integrated directly and the bilinear value comes
    from polarisation.
    """
    curve, _ = unit_parametrize(geodesic, spec)
    Vn = _rescale_field(V, geodesic, curve)
    Wn = None if W is None else _rescale_field(W, geodesic, curve)
    if check:
        _check_perpendicular(spec, curve, Vn)
        if Wn is not None:
            _check_perpendicular(spec, curve, Wn)
    a, b, n = _nodes(curve, panels_per_unit)

    def quadratic(F):
        return -quad(lambda s: _integrand(spec, curve, F, s), a, b, n)

    if Wn is None:
        return quadratic(Vn)
    return 0.25 * (quadratic(Vn + Wn) - quadratic(Vn + Wn.scaled(-1.0)))


def index_form_bilinear(spec, geodesic, V, W, **kw) -> float:
    return index_form(spec, geodesic, V, W, **kw)


def static_index_form(spec: ProductSpec, geodesic: CurveSegment, V: VariationField,
                      panels_per_unit: int = PANELS_PER_UNIT) -> float:
    """Reduced index form for ``-du^2 + f1(u, x)^2 dx^2 + f2(u)^2 g_F``.

    Written in terms of the partial derivatives of ``f1^2`` and ``f2^2`` along
    the curve, with ``V = (nu_B, nu_1, V_2)``.
    """
    if spec.base.dim != 1 or len(spec.fibers) != 2 or spec.fibers[0].dim != 1:
        raise PreconditionError("static form needs a 1D base, a 1D first fiber and a second fiber")
    curve, _ = unit_parametrize(geodesic, spec)
    Vn = _rescale_field(V, geodesic, curve)
    fac = _Factors(spec)
    a, b, n = _nodes(curve, panels_per_unit)

    def integrand(s):
        x, xd = curve.position(s), curve.tangent(s)
        v, vd = Vn(s), Vn.rate(s)
        nuB, nu1, V2 = v[..., 0], v[..., 1], v[..., 2:]
        nuBd, nu1d = vd[..., 0], vd[..., 1]
        tau1d = xd[..., 1]
        g2 = xd[..., 2:]
        f1, f1u, f1x, H1uu, H1ux, H1xx = fac.warp(0, x, order=2)
        f2, f2u, _, H2uu, _, _ = fac.warp(1, x, order=2)
        f1u, f1x, f2u = f1u[..., 0], f1x[..., 0], f2u[..., 0]
        s1uu = 2 * (f1 * H1uu[..., 0, 0] + f1u**2)
        s1xx = 2 * (f1 * H1xx[..., 0, 0] + f1x**2)
        s1ux = 2 * (f1 * H1ux[..., 0, 0] + f1u * f1x)
        s2uu = 2 * (f2 * H2uu[..., 0, 0] + f2u**2)
        gF, _, GF, RF = fac.geometry(fac.fibers[1], x[..., 2:], order=2)
        DV2 = vd[..., 2:] + np.einsum("...kij,...i,...j->...k", GF, g2, V2)

        def q(g, u, w):
            return np.einsum("...ab,...a,...b->...", g, u, w)

        curv = q(gF, np.einsum("...lijk,...i,...j,...k->...l", RF, V2, g2, g2), V2)
        return (-nuBd**2 + f1**2 * nu1d**2
                + 0.5 * (nuB**2 * s1uu + nu1**2 * s1xx + 2 * nuB * nu1 * s1ux) * tau1d**2
                + 2 * (nuB * 2 * f1 * f1u + nu1 * 2 * f1 * f1x) * nu1d * tau1d
                + f2**2 * (q(gF, DV2, DV2) - curv)
                + 0.5 * nuB**2 * s2uu * q(gF, g2, g2)
                + 2 * nuB * 2 * f2 * f2u * q(gF, DV2, g2))

    return -quad(integrand, a, b, n)


def boundary_term(spec: ProductSpec, geodesic: CurveSegment, V: VariationField) -> tuple[float, float]:
    """Endpoint bracket of the second variation for the coordinate-linear variation.

    Along ``gamma + s V`` the s-curves have zero coordinate acceleration, so
    their covariant acceleration is ``Gamma(V, V)`` blockwise.
    """
    fac = _Factors(spec)
    sl = fac.slices
    out = []
    for s in geodesic.span:
        x, xd, v = geodesic.position(s), geodesic.tangent(s), V(s)
        gB, _, GB, _ = fac.geometry(fac.base, x[sl[0]])
        VB = v[sl[0]]
        val = float(np.einsum("ab,a,b->", gB, np.einsum("kij,i,j->k", GB, VB, VB), xd[sl[0]]))
        for i, mfF in enumerate(fac.fibers):
            gF, _, GF, _ = fac.geometry(mfF, x[sl[i + 1]])
            Vi = v[sl[i + 1]]
            b = fac.warp(i, x)[0]
            val += float(b**2 * np.einsum("ab,a,b->", gF, np.einsum("kij,i,j->k", GF, Vi, Vi), xd[sl[i + 1]]))
        out.append(val)
    return out[0], out[1]


def _length(spec, curve, V, s, a, b, n):
    mf = metric_field(spec)

    def integrand(t):
        x = curve.position(t) + s * V(t)
        xd = curve.tangent(t) + s * V.rate(t)
        h = -np.einsum("...ab,...a,...b->...", mf.value(x), xd, xd)
        if np.any(h <= 0):
            raise VariationLeavesTimelikeCone(f"variation not timelike at s={s!r}")
        return np.sqrt(h)

    return quad(integrand, a, b, n)


def second_variation_fd(spec: ProductSpec, geodesic: CurveSegment, V: VariationField,
                        h: float = 1e-3, panels_per_unit: int = PANELS_PER_UNIT) -> float:
    """Central second difference of the length of ``gamma + s V`` at ``s = 0``."""
    curve, _ = unit_parametrize(geodesic, spec)
    Vn = _rescale_field(V, geodesic, curve)
    a, b, n = _nodes(curve, panels_per_unit)
    L = [_length(spec, curve, Vn, s, a, b, n) for s in (-h, 0.0, h)]
    return (L[0] - 2 * L[1] + L[2]) / h**2


# ---------------------------------------------------------------------------
# CSV exchange


def write_curve_csv(path: str | Path, curve: CurveSegment) -> None:
    """Columns ``t, x0.., v0..`` in coordinate declaration order."""
    n = curve.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"x{i}" for i in range(n)), *(f"v{i}" for i in range(n))])
        for t, x, v in zip(curve.t, curve.points, curve.velocity):
            w.writerow([repr(float(t)), *map(repr, map(float, x)), *map(repr, map(float, v))])


def read_curve_csv(path: str | Path) -> CurveSegment:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 1) // 2
    return CurveSegment(data[:, 0], data[:, 1:1 + n], data[:, 1 + n:])


def write_variation_csv(path: str | Path, V: VariationField) -> None:
    """Columns ``t, V0..``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"V{i}" for i in range(V.values.shape[1]))])
        for t, v in zip(V.t, V.values):
            w.writerow([repr(float(t)), *map(repr, map(float, v))])


def read_variation_csv(path: str | Path, vanishes_at_ends: bool = True) -> VariationField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return VariationField(data[:, 0], data[:, 1:], vanishes_at_ends=vanishes_at_ends)
