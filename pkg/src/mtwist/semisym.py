"""Semi-symmetric metric connection on a multiply twisted product, blockwise.

The connection is ``nabla_X Y + pi(Y) X - g(X, Y) P`` with ``pi = g(., P)``.
The torsion vector ``P`` lives either on the base or on a single fiber ``F_r``
and its components depend only on that factor's coordinates.  No
normalisation of ``P`` is assumed: ``pi(P)`` can have either sign.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .chart import ProductSpec, make_spec
from .errors import WrongConnectionError
from .oracle import VectorField, christoffel, riemann
from .twisted import (FactorGeometry, TwistedContext, _conn_blocks, _curv_blocks,
                      _curv_same_fiber, _ricci_blocks, fiber_scalar_term, lc_connection)

__all__ = [
    "SemisymContext", "ss_context", "ss_connection", "ss_curvature", "ss_ricci", "ss_scalar",
    "ss_curvature_tensor", "ss_ricci_tensor", "einstein_residual", "ricci_antisymmetry_residual",
    "warped_einstein_conditions", "torsion_residual",
]


_BASE_SS: "weakref.WeakKeyDictionary[ProductSpec, ProductSpec]" = weakref.WeakKeyDictionary()


def _base_with_torsion(spec: ProductSpec) -> ProductSpec:
    s = _BASE_SS.get(spec)
    if s is None:
        s = make_spec(spec.base.metric, spec.base.coords, signature=spec.base.signature,
                      torsion_location="base", torsion_components=spec.torsion.components,
                      domain_box=spec.domain_box[spec.base_slice])
        _BASE_SS[spec] = s
    return s


@dataclass
class TorsionData:
    block: int  # -1 base, otherwise fiber index
    comps: np.ndarray  # components in the carrying factor
    dcomps: np.ndarray  # dcomps[c, a] = d_a P^c in factor coordinates
    vec: np.ndarray  # global vector


class SemisymContext:
    """Wraps a :class:`TwistedContext` with torsion-vector data."""

    def __init__(self, spec: ProductSpec, p, leaf: bool = True):
        if spec.torsion.location == "none":
            raise WrongConnectionError("spec carries no torsion vector; use the Levi-Civita routines")
        self.lc = TwistedContext(spec, p, leaf)
        c = self.lc
        blk = spec.torsion_block()
        sl = c.slices[blk + 1]
        coords = spec.base.coords if blk == -1 else spec.fibers[blk].coords
        vf = VectorField(list(spec.torsion.components), coords)
        comps, dcomps, _ = vf.jets(c.p[sl], order=1)
        self.P = TorsionData(blk, comps, dcomps, c.emb(blk, comps))
        self.r = blk
        if blk == -1:
            self.base_ss = FactorGeometry.of(_base_with_torsion(spec), c.p[sl], "ss")
            self.DPB = dcomps + np.einsum("cad,d->ca", c.base.gamma, comps)
        self.piP = c.g(self.P.vec, self.P.vec)
        self.div = self._div()

    @property
    def nbar(self) -> int:
        return self.lc.nbar

    def pi(self, A) -> float:
        return self.lc.g(A, self.P.vec)

    def nabla_P(self, A) -> np.ndarray:
        """Levi-Civita derivative of the torsion vector along ``A`` (block formulas)."""
        c = self.lc
        r = self.r
        a = c.part(A, r)
        out = c.emb(r, self.P.dcomps @ a)
        return out + lc_connection(c.spec, c.p, A, self.P.vec, ctx=c)

    def _div(self) -> float:
        """Trace of nabla P over the directions of the carrying factor."""
        c = self.lc
        sl = c.slices[self.r + 1]
        eye = np.eye(c.nbar)
        return float(sum(self.nabla_P(eye[k])[k] for k in range(sl.start, sl.stop)))

    def db(self, i: int, X) -> float:
        """``X(b_i) / b_i`` for a base vector X."""
        w = self.lc.warps[i]
        return float(X @ w.dB) / w.b


def ss_context(spec, p, leaf: bool = True) -> SemisymContext:
    return SemisymContext(spec, p, leaf)


def _need(ctx, spec, p):
    return ctx if ctx is not None else SemisymContext(spec, p)


# ---------------------------------------------------------------------------
# connection


def _ss_conn_blocks(s: SemisymContext, ba, A, bb, B) -> np.ndarray:
    c = s.lc
    lc = _conn_blocks(c, ba, A, bb, B)
    a, b = c.emb(ba, A), c.emb(bb, B)
    P = s.P.vec
    if s.r == -1:
        if ba == -1 and bb == -1:
            return lc + c.base.dot(B, s.P.comps) * a - c.base.dot(A, B) * P
        if ba == -1:
            return lc
        if bb == -1:
            return lc + c.base.dot(B, s.P.comps) * a
        if ba != bb:
            return lc
        return lc - c.g(a, b) * P
    if ba == -1 and bb == -1:
        return lc - c.base.dot(A, B) * P
    if ba == -1:
        return lc + s.pi(b) * a
    if bb == -1:
        return lc
    if ba != bb:
        return lc + s.pi(b) * a
    return lc + s.pi(b) * a - c.g(a, b) * P


def ss_connection(spec, p, A, B, ctx: SemisymContext | None = None) -> np.ndarray:
    s = _need(ctx, spec, p)
    out = np.zeros(s.nbar)
    for ba, a in s.lc.pieces(A):
        for bb, b in s.lc.pieces(B):
            out += _ss_conn_blocks(s, ba, a, bb, b)
    return out


# ---------------------------------------------------------------------------
# curvature with P on the base


def _ss_curv_base(s: SemisymContext, b1, A, b2, B, b3, C) -> np.ndarray:
    c = s.lc
    z = np.zeros(c.nbar)
    P = s.P.vec
    Pb = s.P.comps
    piP = s.piP

    def pib(X):
        return c.base.dot(X, Pb)

    def nabXP(X):
        return s.DPB @ X

    if b1 == -1 and b2 == -1:
        if b3 == -1:
            return c.emb(-1, s.base_ss.curv(A, B, C))
        return z
    if (b1 == -1) != (b2 == -1):
        # one base, one fiber in the first two slots
        sign = 1.0 if b1 != -1 else -1.0
        (i, V), X = ((b1, A), B) if b1 != -1 else ((b2, B), A)
        if b3 == -1:  # R(V, X) Y
            Y = C
            w = c.warps[i]
            gXY = c.base.dot(X, Y)
            coef = ((X @ w.hess_B @ Y) / w.b + s.db(i, Pb) * gXY + piP * gXY
                    + c.base.dot(Y, nabXP(X)) - pib(X) * pib(Y))
            return sign * c.emb(i, -coef * V)
        if b3 != i:
            return z
        # R(X, V) W with W in the same fiber
        W = C
        w = c.warps[i]
        gWV = w.b**2 * c.gF(i, W, V)
        grad_F_Xln = c.fibers[i].ginv @ (w.mixed_ln.T @ X)
        base = (c.base.ginv @ w.hess_B @ X) / w.b + s.db(i, Pb) * X + nabXP(X) + piP * X - pib(X) * Pb
        out = c.emb(i, c.vx_ln(i, X, W) * V - gWV * grad_F_Xln / w.b**2) - gWV * c.emb(-1, base)
        return -sign * out
    # first two slots in fibers
    if b3 == -1:
        if b1 != b2:
            return z
        i = b1
        return c.emb(i, c.vx_ln(i, C, A) * B - c.vx_ln(i, C, B) * A)
    if b1 == b2 == b3:
        i = b1
        w = c.warps[i]
        U, V, W = A, B, C
        gVW = w.b**2 * c.gF(i, V, W)
        gUW = w.b**2 * c.gF(i, U, W)
        out = _curv_same_fiber(c, i, U, V, W)
        return out - (2 * s.db(i, Pb) + piP) * c.emb(i, gVW * U - gUW * V)
    if b1 == b2:
        return z

    def cross(k, U, i, V, W):
        wi, wk = c.warps[i], c.warps[k]
        gVW = wi.b**2 * c.gF(i, V, W)
        coef = (c.base.dot(wi.grad_B, wk.grad_B) / (wi.b * wk.b) + s.db(i, Pb) + s.db(k, Pb) + piP)
        return c.emb(k, -gVW * coef * U)

    if b3 == b2:
        return cross(b1, A, b2, B, C)
    if b3 == b1:
        return -cross(b2, B, b1, A, C)
    return z


# ---------------------------------------------------------------------------
# curvature with P on fiber l


def _ss_curv_fiber(s: SemisymContext, b1, A, b2, B, b3, C) -> np.ndarray:
    c = s.lc
    l = s.r
    z = np.zeros(c.nbar)
    P = s.P.vec
    piP = s.piP
    wl = c.warps[l]
    g = c.g

    def dbl(X):
        return float(X @ wl.dB) / wl.b

    if b1 == -1 and b2 == -1:
        X, Y = A, B
        if b3 == -1:
            Z = C
            gXZ, gYZ = c.base.dot(X, Z), c.base.dot(Y, Z)
            out = c.emb(-1, c.base.curv(X, Y, Z)) + (gXZ * dbl(Y) - gYZ * dbl(X)) * P
            return out + piP * c.emb(-1, gXZ * Y - gYZ * X)
        V = c.emb(b3, C)
        return s.pi(V) * c.emb(-1, dbl(X) * Y - dbl(Y) * X)
    if (b1 == -1) != (b2 == -1):
        sign = 1.0 if b1 != -1 else -1.0
        (i, Vc), X = ((b1, A), B) if b1 != -1 else ((b2, B), A)
        V = c.emb(i, Vc)
        w = c.warps[i]
        if b3 == -1:  # R(V, X) Y
            Y = C
            gXY = c.base.dot(X, Y)
            out = c.emb(i, -(X @ w.hess_B @ Y) / w.b * Vc)
            if i != l:
                out = out - piP * gXY * V
            else:
                out = (out - s.pi(V) * s.db(i, Y) * c.emb(-1, X) - gXY * s.nabla_P(V)
                       - gXY * (piP * V - s.pi(V) * P))
            return sign * out
        W = c.emb(b3, C)
        if b3 != i:  # R(X, V) W
            return -sign * (dbl(X) * s.pi(W) * V)
        gWV = g(W, V)
        grad_F_Xln = c.fibers[i].ginv @ (w.mixed_ln.T @ X)
        Xg = c.emb(-1, X)
        out = (c.vx_ln(i, X, C) * V - gWV * c.emb(-1, c.base.ginv @ w.hess_B @ X) / w.b
               - c.gF(i, C, Vc) * c.emb(i, grad_F_Xln) + dbl(X) * s.pi(W) * V
               - g(W, s.nabla_P(V)) * Xg - gWV * dbl(X) * P - gWV * piP * Xg
               + s.pi(V) * s.pi(W) * Xg)
        return -sign * out
    # first two slots in fibers
    i, j = b1, b2
    V, W = c.emb(i, A), c.emb(j, B)
    if b3 == -1:
        X = C
        if i != j:
            out = np.zeros(c.nbar)
            if i == l:
                out -= s.pi(V) / c.warps[i].b * float(X @ c.warps[i].dB) * W
            if j == l:
                out += s.pi(W) / c.warps[j].b * float(X @ c.warps[j].dB) * V
            return out
        out = c.emb(i, c.vx_ln(i, X, A) * B - c.vx_ln(i, X, B) * A)
        if i == l:
            out -= s.db(i, X) * (s.pi(V) * W - s.pi(W) * V)
        return out
    k = b3
    if i == j == k:
        U, V, W = c.emb(i, A), c.emb(i, B), c.emb(i, C)
        out = _curv_same_fiber(c, i, A, B, C)
        gUW, gVW = g(U, W), g(V, W)
        out = out + piP * (gUW * V - gVW * U)
        if i == l:
            nU, nV = s.nabla_P(U), s.nabla_P(V)
            out = (out + g(W, nU) * V - g(W, nV) * U + gUW * nV - gVW * nU
                   + (gVW * s.pi(U) - gUW * s.pi(V)) * P + s.pi(W) * (s.pi(V) * U - s.pi(U) * V))
        return out
    if i == j:
        return z

    def cross(k, Uc, i, Vc, Wc):
        U, V, W = c.emb(k, Uc), c.emb(i, Vc), c.emb(i, Wc)
        wi, wk = c.warps[i], c.warps[k]
        gVW = g(V, W)
        return (-gVW * c.base.dot(wi.grad_B, wk.grad_B) / (wi.b * wk.b) * U
                - g(W, s.nabla_P(V)) * U - gVW * s.nabla_P(U) - piP * gVW * U
                + gVW * s.pi(U) * P + s.pi(W) * (s.pi(V) * U - s.pi(U) * V))

    if k == j:
        return cross(i, A, j, B, C)
    if k == i:
        return -cross(j, B, i, A, C)
    return z


def ss_curvature(spec, p, A, B, C, ctx: SemisymContext | None = None) -> np.ndarray:
    """Semi-symmetric ``R(A, B) C`` from the block formulas."""
    s = _need(ctx, spec, p)
    block = _ss_curv_base if s.r == -1 else _ss_curv_fiber
    out = np.zeros(s.nbar)
    for b1, a in s.lc.pieces(A):
        for b2, b in s.lc.pieces(B):
            for b3, cc in s.lc.pieces(C):
                out += block(s, b1, a, b2, b, b3, cc)
    return out


def ss_curvature_tensor(spec, p, ctx: SemisymContext | None = None) -> np.ndarray:
    s = _need(ctx, spec, p)
    n = s.nbar
    eye = np.eye(n)
    R = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                R[:, i, j, k] = ss_curvature(spec, p, eye[i], eye[j], eye[k], ctx=s)
    return R


# ---------------------------------------------------------------------------
# Ricci and scalar


def _ss_ricci_blocks(s: SemisymContext, ba, A, bb, B) -> float:
    c = s.lc
    nbar = c.nbar
    piP = s.piP
    if s.r == -1:
        Pb = s.P.comps
        if ba == -1 and bb == -1:
            X, Y = A, B
            gXY = c.base.dot(X, Y)
            val = float(X @ s.base_ss.ricci @ Y)
            for i, w in enumerate(c.warps):
                val += c.ls[i] * ((X @ w.hess_B @ Y) / w.b + s.db(i, Pb) * gXY + piP * gXY
                                  + c.base.dot(Y, s.DPB @ X) - c.base.dot(X, Pb) * c.base.dot(Y, Pb))
            return val
        if ba == -1 or bb == -1:
            return _ricci_blocks(c, ba, A, bb, B)
        if ba != bb:
            return 0.0
        i = ba
        w = c.warps[i]
        extra = (nbar - 2) * piP + s.div + (nbar + c.ls[i] - 2) * s.db(i, Pb)
        extra += sum(c.ls[j] * s.db(j, Pb) for j in range(len(c.warps)) if j != i)
        return _ricci_blocks(c, ba, A, bb, B) + extra * w.b**2 * c.gF(i, A, B)
    r = s.r
    if ba == -1 and bb == -1:
        gXY = c.base.dot(A, B)
        return _ricci_blocks(c, ba, A, bb, B) + gXY * piP * (nbar - 2) + gXY * s.div
    if ba == -1 or bb == -1:
        X, (i, Vc) = (A, (bb, B)) if ba == -1 else (B, (ba, A))
        sign = 1.0 if ba == -1 else -1.0
        return (_ricci_blocks(c, ba, A, bb, B)
                + sign * (nbar - 2) * s.db(r, X) * s.pi(c.emb(i, Vc)))
    if ba != bb:
        return 0.0
    i = ba
    V, W = c.emb(i, A), c.emb(i, B)
    gVW = c.g(V, W)
    return (_ricci_blocks(c, ba, A, bb, B) + gVW * (nbar - 2) * piP
            + (nbar - 2) * c.g(W, s.nabla_P(V)) + (2 - nbar) * s.pi(V) * s.pi(W) + gVW * s.div)


def ss_ricci(spec, p, A, B, ctx: SemisymContext | None = None) -> float:
    s = _need(ctx, spec, p)
    return sum((_ss_ricci_blocks(s, ba, a, bb, b) for ba, a in s.lc.pieces(A)
                for bb, b in s.lc.pieces(B)), 0.0)


def ss_ricci_tensor(spec, p, ctx: SemisymContext | None = None) -> np.ndarray:
    s = _need(ctx, spec, p)
    eye = np.eye(s.nbar)
    return np.array([[ss_ricci(spec, p, eye[i], eye[j], ctx=s) for j in range(s.nbar)]
                     for i in range(s.nbar)])


def ss_scalar(spec, p, ctx: SemisymContext | None = None) -> float:
    s = _need(ctx, spec, p)
    c = s.lc
    n, nbar = c.n, c.nbar
    m = len(c.warps)
    S = s.base_ss.scalar if s.r == -1 else c.base.scalar
    for i, w in enumerate(c.warps):
        l = c.ls[i]
        S += 2 * l / w.b * w.lap_B + fiber_scalar_term(c, i) + l * (l - 1) * w.norm2_B / w.b**2
        for k, wk in enumerate(c.warps):
            if k != i:
                S += l * c.ls[k] * c.base.dot(w.grad_B, wk.grad_B) / (w.b * wk.b)
    if s.r == -1:
        Pb = s.P.comps
        for i in range(m):
            l = c.ls[i]
            S += l * (n + nbar + l - 2) * s.db(i, Pb)
            S += sum(l * c.ls[j] * s.db(j, Pb) for j in range(m) if j != i)
            S += l * (n + nbar - 3) * s.piP + 2 * l * s.div
    else:
        S += s.piP * (nbar - 1) * (nbar - 2) + 2 * (nbar - 1) * s.div
    return float(S)


# ---------------------------------------------------------------------------


def einstein_residual(spec, lam: float, grid, source: str = "structured") -> dict:
    """Max over grid points and coordinate pairs of ``|Ric(e_a, e_b) - lam g_ab|``."""
    worst, where = 0.0, None
    for p in np.atleast_2d(np.asarray(grid, float)):
        if source == "structured":
            s = SemisymContext(spec, p)
            ric, g = ss_ricci_tensor(spec, p, ctx=s), s.lc.metric()
        elif source == "oracle":
            cur = riemann(spec, p, "ss")
            ric, g = cur.ricci, cur.metric
        else:
            raise ValueError(f"unknown source {source!r}")
        r = float(np.abs(ric - lam * g).max())
        if where is None or r > worst:
            worst, where = r, p.copy()
    return {"max_abs_residual": worst, "worst_point": where}


def torsion_residual(spec, p, source: str = "structured") -> float:
    """Max deviation of ``T(e_a, e_b)`` from ``pi(e_b) e_a - pi(e_a) e_b`` over coordinate pairs."""
    s = SemisymContext(spec, p)
    eye = np.eye(spec.dim)
    if source == "oracle":
        G = christoffel(spec, p, "ss").total
    worst = 0.0
    for a in range(spec.dim):
        for b in range(spec.dim):
            if source == "oracle":
                T = G[:, a, b] - G[:, b, a]
            else:
                T = ss_connection(spec, p, eye[a], eye[b], ctx=s) - ss_connection(spec, p, eye[b], eye[a], ctx=s)
            want = s.pi(eye[b]) * eye[a] - s.pi(eye[a]) * eye[b]
            worst = max(worst, float(np.abs(T - want).max()))
    return worst


def ricci_antisymmetry_residual(spec, p) -> float:
    """Largest deviation of Ric(X,V) - Ric(V,X) from 2(nbar-2) X(b_r)/b_r pi(V).

    Only meaningful for a torsion vector on fiber ``r``.
    """
    s = SemisymContext(spec, p)
    if s.r == -1:
        raise ValueError("antisymmetry law concerns a torsion vector on a fiber")
    cur = riemann(spec, p, "ss")
    c = s.lc
    worst = 0.0
    eye = np.eye(c.nbar)
    for a in range(c.n):
        for i, sl in enumerate(c.slices[1:]):
            for al in range(sl.start, sl.stop):
                X, V = eye[a], eye[al]
                meas = cur.ricci[a, al] - cur.ricci[al, a]
                pred = 2 * (c.nbar - 2) * s.db(s.r, X[:c.n]) * s.pi(V)
                worst = max(worst, abs(meas - pred))
    return worst


def warped_einstein_conditions(spec: ProductSpec, lam: float, fiber_constants, ts) -> dict:
    """Residuals of the Einstein conditions for ``-dt^2 + sum b_i(t)^2 g_i`` with ``P = d/dt``.

    ``fiber_constants`` are the Einstein constants of the fibers.  Returns the
    time-equation residual, per-fiber residuals, and the value of
    ``Ric(d_t, d_t)`` predicted by the printed closed form ``-sum l_i (b'/b - b''/b)``.
    """
    ls = spec.fiber_dims
    nbar = spec.dim
    tname = spec.base.coords[0]
    out = {"time": 0.0, "fibers": [0.0] * len(ls), "ric_tt_closed_form": []}
    for t in np.atleast_1d(ts):
        jets = [spec.warp(i).jet({tname: float(t)}, [tname], order=2) for i in range(len(ls))]
        b = [float(j.v) for j in jets]
        b1 = [float(j.d1[0]) for j in jets]
        b2 = [float(j.d2[0, 0]) for j in jets]
        time = sum(l * (b1[i] / b[i] - b2[i] / b[i]) for i, l in enumerate(ls)) - lam
        out["time"] = max(out["time"], abs(time))
        out["ric_tt_closed_form"].append(-sum(l * (b1[i] / b[i] - b2[i] / b[i]) for i, l in enumerate(ls)))
        for i, l in enumerate(ls):
            cross = sum(ls[j] * b1[j] / b[j] for j in range(len(ls)) if j != i)
            lhs = (fiber_constants[i] - b[i] * b2[i] - (l - 1) * b1[i] ** 2
                   + (b[i] ** 2 - b[i] * b1[i]) * cross + (2 - nbar) * b[i] ** 2
                   + (nbar + l - 2) * b[i] * b1[i])
            out["fibers"][i] = max(out["fibers"][i], abs(lhs - lam * b[i] ** 2))
    return out
