"""Levi-Civita connection and curvature of a multiply twisted product, blockwise.

The structured formulas here only look at factor-level data: the
geometry of ``(B, g_B)``, of each fiber, and jets of the warping functions.
The full product metric is never assembled, so agreement with
:mod:`mtwist.oracle` is a genuine cross-check.

Vectors are global coordinate vectors interpreted as constant-coefficient
fields.  Inputs supported on several blocks are expanded by multilinearity.

For a twisted warp ``b_i(x_B, x_i)`` the intrinsic fiber curvature
(``R^{F_i}``, ``Ric^{F_i}`` and ``S^{F_i} / b_i^2``) is evaluated on the leaf
metric ``b_i(x_B, .)^2 g_{F_i}`` at the current base point.  For warped
factors this coincides with the curvature of ``g_{F_i}`` itself.  Pass
``leaf=False`` to use ``g_{F_i}`` unconditionally.
"""
from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chart import ProductSpec, make_spec, sample_grid
from .errors import PreconditionError
from .expr import ZERO, Pow, substitute
from .oracle import orthonormal_frame, riemann

__all__ = [
    "FactorGeometry", "WarpGeometry", "TwistedContext", "context",
    "lc_connection", "lc_curvature", "lc_ricci", "lc_scalar",
    "lc_curvature_tensor", "lc_ricci_tensor", "mixed_ricci_flat_check",
]


@dataclass
class FactorGeometry:
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    frame: np.ndarray
    eps: np.ndarray

    @classmethod
    def of(cls, spec: ProductSpec, p, connection: str = "lc") -> "FactorGeometry":
        c = riemann(spec, p, connection)
        return cls(c.metric, np.linalg.inv(c.metric), c.christoffel, c.riemann,
                   c.ricci, c.scalar, c.frame, c.eps)

    def conn(self, a, b) -> np.ndarray:
        return np.einsum("cab,a,b->c", self.gamma, a, b)

    def curv(self, x, y, z) -> np.ndarray:
        return np.einsum("lijk,i,j,k->l", self.riemann, x, y, z)

    def dot(self, a, b) -> float:
        return float(a @ self.g @ b)


@dataclass
class WarpGeometry:
    b: float
    dB: np.ndarray  # partials along base coordinates
    dF: np.ndarray  # partials along own fiber coordinates
    HBB: np.ndarray
    HBF: np.ndarray
    HFF: np.ndarray
    grad_B: np.ndarray  # raised with g_B
    grad_F: np.ndarray  # raised with g_F (not the leaf metric)
    hess_B: np.ndarray  # covariant Hessian on the base
    lap_B: float
    norm2_B: float
    mixed_ln: np.ndarray  # d_a d_alpha ln b, shape (n, l)

    def dln_B(self) -> np.ndarray:
        return self.dB / self.b


_FACTORS: "weakref.WeakKeyDictionary[ProductSpec, tuple]" = weakref.WeakKeyDictionary()


def _factor_specs(spec: ProductSpec):
    cached = _FACTORS.get(spec)
    if cached is None:
        base = make_spec(spec.base.metric, spec.base.coords, signature=spec.base.signature,
                         domain_box=spec.domain_box[spec.base_slice])
        fibers = [make_spec(f.metric, f.coords, signature=[1] * f.dim,
                            domain_box=spec.domain_box[spec.fiber_slice(i)])
                  for i, f in enumerate(spec.fibers)]
        cached = (base, fibers)
        _FACTORS[spec] = cached
    return cached


def _leaf_spec(spec: ProductSpec, i: int, base_values: dict) -> ProductSpec:
    f = spec.fibers[i]
    w2 = Pow(substitute(spec.warp(i), base_values), 2.0)
    metric = [[e if e == ZERO else w2 * e for e in row] for row in f.metric]
    return make_spec(metric, f.coords, signature=[1] * f.dim)


class TwistedContext:
    """Factor-level geometry of a product at one point."""

    def __init__(self, spec: ProductSpec, p, leaf: bool = True):
        self.spec = spec
        self.p = np.asarray(p, dtype=float)
        self.leaf = leaf
        self.slices = spec.block_slices()
        self.n = spec.base.dim
        self.ls = list(spec.fiber_dims)
        self.nbar = spec.dim
        base_spec, fiber_specs = _factor_specs(spec)
        pb = self.p[self.slices[0]]
        self.base = FactorGeometry.of(base_spec, pb)
        self.fibers = [FactorGeometry.of(fs, self.p[self.slices[i + 1]])
                       for i, fs in enumerate(fiber_specs)]
        base_values = dict(zip(spec.base.coords, pb))
        if leaf:
            self.leaves = [FactorGeometry.of(_leaf_spec(spec, i, base_values), self.p[self.slices[i + 1]])
                           for i in range(len(spec.fibers))]
        else:
            self.leaves = self.fibers
        self.warps = [self._warp(i) for i in range(len(spec.fibers))]

    def _warp(self, i: int) -> WarpGeometry:
        spec = self.spec
        f = spec.fibers[i]
        names = list(spec.base.coords) + list(f.coords)
        env = spec.env(self.p)
        jet = spec.warp(i).jet(env, names, order=2)
        n = self.n
        b = float(jet.v)
        d1 = np.asarray(jet.gradient, float)
        d2 = np.asarray(jet.hessian, float)
        dB, dF = d1[:n], d1[n:]
        HBB, HBF, HFF = d2[:n, :n], d2[:n, n:], d2[n:, n:]
        B, F = self.base, self.fibers[i]
        hess = HBB - np.einsum("cab,c->ab", B.gamma, dB)
        mixed_ln = HBF / b - np.outer(dB, dF) / b**2
        return WarpGeometry(
            b, dB, dF, HBB, HBF, HFF,
            B.ginv @ dB, F.ginv @ dF, hess,
            float(np.einsum("ab,ab->", B.ginv, hess)), float(dB @ B.ginv @ dB), mixed_ln,
        )

    # -- block helpers ------------------------------------------------------
    def emb(self, block: int, comps) -> np.ndarray:
        out = np.zeros(self.nbar)
        out[self.slices[block + 1]] = comps
        return out

    def part(self, v, block: int) -> np.ndarray:
        return np.asarray(v, float)[self.slices[block + 1]]

    def pieces(self, v):
        """Yield ``(block, components)`` for each nonzero block of ``v``."""
        v = np.asarray(v, float)
        for blk in range(-1, len(self.ls)):
            c = v[self.slices[blk + 1]]
            if np.any(c != 0):
                yield blk, c

    def g(self, a, b) -> float:
        """Product metric between two global vectors."""
        a, b = np.asarray(a, float), np.asarray(b, float)
        out = self.base.dot(a[self.slices[0]], b[self.slices[0]])
        for i, w in enumerate(self.warps):
            s = self.slices[i + 1]
            out += w.b**2 * self.fibers[i].dot(a[s], b[s])
        return out

    def gF(self, i, u, w) -> float:
        return self.fibers[i].dot(u, w)

    def metric(self) -> np.ndarray:
        out = np.zeros((self.nbar, self.nbar))
        s0 = self.slices[0]
        out[s0, s0] = self.base.g
        for i, w in enumerate(self.warps):
            s = self.slices[i + 1]
            out[s, s] = w.b**2 * self.fibers[i].g
        return out

    def frame(self):
        return orthonormal_frame(self.metric())

    # mixed second derivative V X (ln b_i) for X in TB, V in TF_i
    def vx_ln(self, i, X, V) -> float:
        return float(X @ self.warps[i].mixed_ln @ V)


@lru_cache(maxsize=512)
def _cached_context(spec_ref, key, leaf):
    spec = spec_ref()
    return TwistedContext(spec, np.array(key), leaf)


def context(spec: ProductSpec, p, leaf: bool = True) -> TwistedContext:
    return _cached_context(weakref.ref(spec), tuple(float(x) for x in np.asarray(p, float)), leaf)


# ---------------------------------------------------------------------------
# connection


def _conn_blocks(c: TwistedContext, ba, A, bb, B) -> np.ndarray:
    if ba == -1 and bb == -1:
        return c.emb(-1, c.base.conn(A, B))
    if ba == -1:  # nabla_X U
        w = c.warps[bb]
        return c.emb(bb, (A @ w.dB) / w.b * B)
    if bb == -1:  # nabla_U X
        w = c.warps[ba]
        return c.emb(ba, (B @ w.dB) / w.b * A)
    if ba != bb:
        return np.zeros(c.nbar)
    i = ba
    w, F = c.warps[i], c.fibers[i]
    U, W = A, B
    dlnF = w.dF / w.b
    gUW = F.dot(U, W)
    fib = (U @ dlnF) * W + (W @ dlnF) * U - gUW / w.b * w.grad_F + F.conn(U, W)
    return c.emb(i, fib) + c.emb(-1, -w.b * gUW * w.grad_B)


def lc_connection(spec, p, A, B, ctx: TwistedContext | None = None) -> np.ndarray:
    """``nabla_A B`` for constant-coefficient fields, assembled from block formulas."""
    c = ctx or context(spec, p)
    out = np.zeros(c.nbar)
    for ba, a in c.pieces(A):
        for bb, b in c.pieces(B):
            out += _conn_blocks(c, ba, a, bb, b)
    return out


# ---------------------------------------------------------------------------
# curvature


def _curv_blocks(c: TwistedContext, b1, A, b2, B, b3, C) -> tuple[np.ndarray, str]:
    z = np.zeros(c.nbar)
    if b1 == -1 and b2 == -1:
        if b3 == -1:
            return c.emb(-1, c.base.curv(A, B, C)), "base-base-base"
        return z, "base-base-fiber"
    if b1 != -1 and b2 == -1:
        if b3 == -1:  # R(V, X) Y
            w = c.warps[b1]
            return c.emb(b1, -(B @ w.hess_B @ C) / w.b * A), "fiber-base-base"
        return _curv_fiber_base_fiber(c, b1, A, B, b3, C)
    if b1 == -1 and b2 != -1:
        if b3 == -1:
            w = c.warps[b2]
            return c.emb(b2, (A @ w.hess_B @ C) / w.b * B), "base-fiber-base"
        v, tag = _curv_base_fiber_fiber(c, A, b2, B, b3, C)
        return v, tag
    # both first slots in fibers
    if b3 == -1:
        if b1 != b2:
            return z, "fiber-fiber-base (distinct)"
        i = b1
        V, W, X = A, B, C
        return c.emb(i, c.vx_ln(i, X, V) * W - c.vx_ln(i, X, W) * V), "fiber-fiber-base (same)"
    if b1 == b2 == b3:
        return _curv_same_fiber(c, b1, A, B, C), "fiber-fiber-fiber (same)"
    if b1 == b2:
        return z, "fiber-fiber-fiber (pair then other)"
    if b3 == b2:  # R(U, V) W with U in F_k, V, W in F_i
        return _curv_cross(c, b1, A, b2, B, C), "fiber-fiber-fiber (cross)"
    if b3 == b1:
        return -_curv_cross(c, b2, B, b1, A, C), "fiber-fiber-fiber (cross)"
    return z, "fiber-fiber-fiber (distinct)"


def _curv_cross(c, k, U, i, V, W) -> np.ndarray:
    wi, wk = c.warps[i], c.warps[k]
    gVW = wi.b**2 * c.gF(i, V, W)
    coef = -gVW * c.base.dot(wi.grad_B, wk.grad_B) / (wi.b * wk.b)
    return c.emb(k, coef * U)


def _curv_base_fiber_fiber(c, X, i, V, j, W):
    if i != j:
        return np.zeros(c.nbar), "base-fiber-fiber (distinct)"
    w = c.warps[i]
    gFVW = c.gF(i, W, V)
    base = -(w.b**2 * gFVW) / w.b * (c.base.ginv @ w.hess_B @ X)
    grad_F_Xln = c.fibers[i].ginv @ (w.mixed_ln.T @ X)
    fib = c.vx_ln(i, X, W) * V - gFVW * grad_F_Xln
    return c.emb(-1, base) + c.emb(i, fib), "base-fiber-fiber (same)"


def _curv_fiber_base_fiber(c, i, V, X, j, W):
    if i != j:
        return np.zeros(c.nbar), "fiber-base-fiber (distinct)"
    v, _ = _curv_base_fiber_fiber(c, X, i, V, j, W)
    return -v, "fiber-base-fiber (same)"


def _curv_same_fiber(c, i, V, W, U) -> np.ndarray:
    w = c.warps[i]
    b2 = w.b**2
    gVU = b2 * c.gF(i, V, U)
    gWU = b2 * c.gF(i, W, U)
    gradB_W = c.base.ginv @ (w.mixed_ln @ W)
    gradB_V = c.base.ginv @ (w.mixed_ln @ V)
    fib = c.leaves[i].curv(V, W, U) - w.norm2_B / b2 * (gWU * V - gVU * W)
    return c.emb(-1, gVU * gradB_W - gWU * gradB_V) + c.emb(i, fib)


def lc_curvature(spec, p, A, B, C, ctx: TwistedContext | None = None) -> np.ndarray:
    """``R(A, B) C`` from the block formulas."""
    c = ctx or context(spec, p)
    out = np.zeros(c.nbar)
    for b1, a in c.pieces(A):
        for b2, b in c.pieces(B):
            for b3, cc in c.pieces(C):
                out += _curv_blocks(c, b1, a, b2, b, b3, cc)[0]
    return out


def lc_curvature_tensor(spec, p, ctx: TwistedContext | None = None) -> np.ndarray:
    """All coordinate components ``R[l, i, j, k]`` from the block formulas."""
    c = ctx or context(spec, p)
    n = c.nbar
    eye = np.eye(n)
    R = np.zeros((n, n, n, n))
    for i, j, k in itertools.product(range(n), repeat=3):
        R[:, i, j, k] = lc_curvature(spec, p, eye[i], eye[j], eye[k], ctx=c)
    return R


def curvature_clause(spec, p, A, B, C, ctx=None) -> str:
    """Name of the block clause used for single-block inputs."""
    c = ctx or context(spec, p)
    (b1, a), = c.pieces(A)
    (b2, b), = c.pieces(B)
    (b3, cc), = c.pieces(C)
    return _curv_blocks(c, b1, a, b2, b, b3, cc)[1]


# ---------------------------------------------------------------------------
# Ricci and scalar curvature


def _ricci_blocks(c: TwistedContext, ba, A, bb, B) -> float:
    if ba == -1 and bb == -1:
        val = float(A @ c.base.ricci @ B)
        for i, w in enumerate(c.warps):
            val += c.ls[i] / w.b * float(A @ w.hess_B @ B)
        return val
    if ba == -1 or bb == -1:
        X, (i, V) = (A, (bb, B)) if ba == -1 else (B, (ba, A))
        return (c.ls[i] - 1) * c.vx_ln(i, X, V)
    if ba != bb:
        return 0.0
    i = ba
    w = c.warps[i]
    bracket = w.lap_B / w.b + (c.ls[i] - 1) * w.norm2_B / w.b**2
    for k, wk in enumerate(c.warps):
        if k != i:
            bracket += c.ls[k] * c.base.dot(w.grad_B, wk.grad_B) / (w.b * wk.b)
    return float(A @ c.leaves[i].ricci @ B) + bracket * w.b**2 * c.gF(i, A, B)


def lc_ricci(spec, p, A, B, ctx: TwistedContext | None = None) -> float:
    c = ctx or context(spec, p)
    return sum((_ricci_blocks(c, ba, a, bb, b) for ba, a in c.pieces(A) for bb, b in c.pieces(B)), 0.0)


def lc_ricci_tensor(spec, p, ctx: TwistedContext | None = None) -> np.ndarray:
    c = ctx or context(spec, p)
    eye = np.eye(c.nbar)
    return np.array([[lc_ricci(spec, p, eye[i], eye[j], ctx=c) for j in range(c.nbar)]
                     for i in range(c.nbar)])


def fiber_scalar_term(c: TwistedContext, i: int) -> float:
    """``S^{F_i} / b_i^2``; with the leaf reading this is the leaf scalar curvature."""
    if c.leaf:
        return c.leaves[i].scalar
    return c.fibers[i].scalar / c.warps[i].b ** 2


def lc_scalar(spec, p, ctx: TwistedContext | None = None) -> float:
    c = ctx or context(spec, p)
    S = c.base.scalar
    for i, w in enumerate(c.warps):
        l = c.ls[i]
        S += 2 * l / w.b * w.lap_B + fiber_scalar_term(c, i) + l * (l - 1) * w.norm2_B / w.b**2
        for k, wk in enumerate(c.warps):
            if k != i:
                S += l * c.ls[k] * c.base.dot(w.grad_B, wk.grad_B) / (w.b * wk.b)
    return float(S)


def mixed_ricci_flat_check(spec: ProductSpec, per_axis: int = 5, tol: float = 1e-8) -> dict:
    """Compare mixed Ricci components with the mixed jets of ``ln b_i`` on a grid.

    With every fiber of dimension > 1 the two vanish together; the report
    carries both maxima and whether the verdicts agree.
    """
    if any(l <= 1 for l in spec.fiber_dims):
        raise PreconditionError("mixed Ricci-flatness test needs every fiber dimension > 1")
    pts = sample_grid(spec.domain_box, per_axis)
    max_ric = max_mixed = 0.0
    n = spec.base.dim
    for p in pts:
        c = TwistedContext(spec, p, leaf=False)
        for i, w in enumerate(c.warps):
            max_mixed = max(max_mixed, float(np.abs(w.mixed_ln).max()))
            for a in range(n):
                for al in range(c.ls[i]):
                    X = np.eye(n)[a]
                    V = np.eye(c.ls[i])[al]
                    max_ric = max(max_ric, abs(_ricci_blocks(c, -1, X, i, V)))
    ric_flat = max_ric < tol
    warped = max_mixed < tol
    return {"mixed_ricci_max": max_ric, "mixed_ln_jet_max": max_mixed,
            "mixed_ricci_flat": ric_flat, "expressible_as_warped": warped,
            "consistent": ric_flat == warped}
