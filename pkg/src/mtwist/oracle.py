"""Brute-force coordinate curvature.

Everything here works on the assembled metric of a chart, ignoring any
product structure, so it serves as the reference the block formulas are
checked against.

Conventions:

* ``gamma[k, i, j]`` is the coefficient of ``d_k`` in ``nabla_{d_i} d_j``.
* ``riemann[l, i, j, k]`` is the ``d_l`` component of ``R(d_i, d_j) d_k`` with
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``.
* ``ricci[i, j] = sum_k eps_k g(R(d_i, E_k) d_j, E_k)`` over an orthonormal
  frame, i.e. the trace of ``Z -> R(X, Z) Y``.  This is the negative of the
  usual Ricci tensor: a unit round sphere has scalar curvature -2 here.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chart import ProductSpec
from .errors import SignatureError, WrongConnectionError
from .expr import ZERO, Expr

__all__ = [
    "MetricField", "VectorField", "CurvatureAtPoint", "ConnectionCoeffs",
    "christoffel", "riemann", "semisym_riemann", "orthonormal_frame",
    "ricci_from_riemann", "scalar_from_ricci", "covariant_derivative_field",
    "metric_field", "torsion_field", "first_bianchi_residual",
]


class MetricField:
    """Metric given entrywise by expressions in named coordinates."""

    def __init__(self, exprs: Sequence[Sequence[Expr]], coords: Sequence[str]):
        self.exprs = [list(r) for r in exprs]
        self.coords = tuple(coords)
        self.n = len(self.coords)
        self._entries = [(a, b, self.exprs[a][b]) for a in range(self.n)
                         for b in range(a, self.n) if self.exprs[a][b] != ZERO]

    def _env(self, p):
        p = np.asarray(p, dtype=float)
        return {c: p[..., i] for i, c in enumerate(self.coords)}

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        env = self._env(p)
        g = np.zeros(p.shape[:-1] + (self.n, self.n))
        for a, b, e in self._entries:
            v = np.asarray(e.evaluate(env), dtype=float)
            g[..., a, b] = v
            g[..., b, a] = v
        return g

    def jets(self, p, order: int = 2):
        """Metric and its partial derivatives at ``p`` (batch allowed).

        Returns ``g[..., a, b]``, ``dg[..., a, b, c] = d_c g_ab`` and, for
        ``order >= 2``, ``d2g[..., a, b, c, d]``.
        """
        p = np.asarray(p, dtype=float)
        env = self._env(p)
        n = self.n
        lead = p.shape[:-1]
        g = np.zeros(lead + (n, n))
        dg = np.zeros(lead + (n, n, n))
        d2g = np.zeros(lead + (n, n, n, n)) if order >= 2 else None
        for a, b, e in self._entries:
            j = e.jet(env, self.coords, order=order)
            for (x, y) in {(a, b), (b, a)}:
                g[..., x, y] = j.v
                dg[..., x, y, :] = j.d1
                if order >= 2:
                    d2g[..., x, y, :, :] = j.d2
        return g, dg, d2g


class VectorField:
    def __init__(self, exprs: Sequence[Expr], coords: Sequence[str]):
        self.exprs = list(exprs)
        self.coords = tuple(coords)
        self.n = len(self.coords)

    def jets(self, p, order: int = 1):
        p = np.asarray(p, dtype=float)
        env = {c: p[..., i] for i, c in enumerate(self.coords)}
        lead = p.shape[:-1]
        v = np.zeros(lead + (self.n,))
        dv = np.zeros(lead + (self.n, self.n))
        d2v = np.zeros(lead + (self.n,) * 3) if order >= 2 else None
        for a, e in enumerate(self.exprs):
            if e == ZERO:
                continue
            j = e.jet(env, self.coords, order=order)
            v[..., a] = j.v
            dv[..., a, :] = j.d1
            if order >= 2:
                d2v[..., a, :, :] = j.d2
        return v, dv, d2v


_FIELDS: "weakref.WeakKeyDictionary[ProductSpec, MetricField]" = weakref.WeakKeyDictionary()


def metric_field(spec) -> MetricField:
    if isinstance(spec, MetricField):
        return spec
    mf = _FIELDS.get(spec)
    if mf is None:
        mf = MetricField(spec.metric_expressions(), spec.coords)
        _FIELDS[spec] = mf
    return mf


def torsion_field(spec: ProductSpec) -> VectorField | None:
    exprs = spec.torsion_expressions()
    return None if exprs is None else VectorField(exprs, spec.coords)


# ---------------------------------------------------------------------------


@dataclass
class ConnectionCoeffs:
    lc: np.ndarray  # gamma[k, i, j]
    torsion_part: np.ndarray | None  # added by the semi-symmetric connection

    @property
    def total(self) -> np.ndarray:
        return self.lc if self.torsion_part is None else self.lc + self.torsion_part


def _gamma(ginv, dg):
    # Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
    # s[l, i, j] = d_i g_lj, dg[l, i, j] = d_j g_li, moved[l, i, j] = d_l g_ij
    s = np.swapaxes(dg, -1, -2)
    lower = 0.5 * (s + dg - np.moveaxis(dg, -1, -3))
    return np.einsum("...kl,...lij->...kij", ginv, lower)


def _dgamma(ginv, dg, d2g):
    # d_m Gamma^k_ij, stored as [k, i, j, m]
    s = np.swapaxes(dg, -1, -2)
    lower = 0.5 * (s + dg - np.moveaxis(dg, -1, -3))
    d_lower = 0.5 * (np.einsum("...ljim->...lijm", d2g) + d2g - np.einsum("...ijlm->...lijm", d2g))
    dginv = -np.einsum("...ka,...abm,...bl->...klm", ginv, dg, ginv)
    return (np.einsum("...klm,...lij->...kijm", dginv, lower)
            + np.einsum("...kl,...lijm->...kijm", ginv, d_lower))


def _torsion_terms(g, dg, P, dP):
    """Semi-symmetric part C^k_ij = delta^k_i pi_j - g_ij P^k and d_m C."""
    n = g.shape[-1]
    eye = np.eye(n)
    pi = np.einsum("...ja,...a->...j", g, P)
    C = np.einsum("ki,...j->...kij", eye, pi) - np.einsum("...ij,...k->...kij", g, P)
    dpi = np.einsum("...jam,...a->...jm", dg, P) + np.einsum("...ja,...am->...jm", g, dP)
    dC = (np.einsum("ki,...jm->...kijm", eye, dpi)
          - np.einsum("...ijm,...k->...kijm", dg, P)
          - np.einsum("...ij,...km->...kijm", g, dP))
    return pi, C, dC


def christoffel(spec, p, connection: str = "lc") -> ConnectionCoeffs:
    mf = metric_field(spec)
    g, dg, _ = mf.jets(p, order=1)
    gam = _gamma(np.linalg.inv(g), dg)
    part = None
    if connection == "ss":
        vf = _require_torsion(spec)
        P, dP, _ = vf.jets(p, order=1)
        _, part, _ = _torsion_terms(g, dg, P, dP)
    return ConnectionCoeffs(gam, part)


def _require_torsion(spec) -> VectorField:
    vf = torsion_field(spec) if isinstance(spec, ProductSpec) else None
    if vf is None:
        raise WrongConnectionError("semi-symmetric connection requested but the spec has no torsion vector")
    return vf


def riemann_from_gamma(G, dG):
    """R[l,i,j,k] from connection coefficients and dG[l,j,k,i] = d_i G^l_jk."""
    return (np.einsum("...ljki->...lijk", dG) - np.einsum("...likj->...lijk", dG)
            + np.einsum("...lim,...mjk->...lijk", G, G)
            - np.einsum("...ljm,...mik->...lijk", G, G))


def ricci_from_riemann(R, g, frame, eps):
    Rlow = np.einsum("bl,liaj->biaj", g, R)
    return np.einsum("ak,bk,k,biaj->ij", frame, frame, eps, Rlow)


def scalar_from_ricci(ric, frame, eps) -> float:
    return float(np.einsum("ak,bk,k,ab->", frame, frame, eps, ric))


@dataclass
class CurvatureAtPoint:
    connection: str
    point: np.ndarray
    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    frame: np.ndarray
    eps: np.ndarray


def riemann(spec, p, connection: str = "lc", method: str = "jet",
            frame: np.ndarray | None = None) -> CurvatureAtPoint:
    """Curvature of the Levi-Civita (``"lc"``) or semi-symmetric (``"ss"``) connection.

    ``method="jet"`` differentiates the Christoffel formula with exact second
    metric jets; ``method="fd"`` takes central differences of the
    connection coefficients instead.
    """
    p = np.asarray(p, dtype=float)
    mf = metric_field(spec)
    g, dg, d2g = mf.jets(p, order=2)
    ginv = np.linalg.inv(g)
    G = _gamma(ginv, dg)
    vf = _require_torsion(spec) if connection == "ss" else None
    if method == "jet":
        dG = _dgamma(ginv, dg, d2g)
        if vf is not None:
            P, dP, _ = vf.jets(p, order=1)
            _, C, dC = _torsion_terms(g, dg, P, dP)
            G, dG = G + C, dG + dC
    elif method == "fd":
        def coeffs(x):
            return christoffel(spec, x, connection).total
        G = coeffs(p)
        h = 1e-5 * (1 + np.abs(p))
        dG = np.empty(G.shape + (len(p),))
        for m in range(len(p)):
            e = np.zeros(len(p))
            e[m] = h[m]
            dG[..., m] = (coeffs(p + e) - coeffs(p - e)) / (2 * h[m])
    else:
        raise ValueError(f"unknown method {method!r}")
    R = riemann_from_gamma(G, dG)
    if frame is None:
        frame, eps = orthonormal_frame(g)
    else:
        eps = np.sign(np.einsum("ak,ab,bk->k", frame, g, frame))
    ric = ricci_from_riemann(R, g, frame, eps)
    return CurvatureAtPoint(connection, p, g, G, R, ric, scalar_from_ricci(ric, frame, eps), frame, eps)


def covariant_derivative_field(spec, p, field: VectorField | Sequence[Expr]):
    """``D[c, a] = (nabla_{d_a} V)^c`` for the Levi-Civita connection."""
    mf = metric_field(spec)
    if not isinstance(field, VectorField):
        field = VectorField(field, mf.coords)
    g, dg, _ = mf.jets(p, order=1)
    G = _gamma(np.linalg.inv(g), dg)
    V, dV, _ = field.jets(p, order=1)
    return dV + np.einsum("cad,d->ca", G, V), V, g


def semisym_riemann(spec: ProductSpec, p) -> CurvatureAtPoint:
    """Semi-symmetric curvature from the Levi-Civita curvature plus torsion terms.

    Evaluates, for X=d_i, Y=d_j, Z=d_k,
    R(X,Y)Z + g(Z,nabla_X P)Y - g(Z,nabla_Y P)X + g(X,Z)nabla_Y P - g(Y,Z)nabla_X P
    + pi(P)[g(X,Z)Y - g(Y,Z)X] + [g(Y,Z)pi(X) - g(X,Z)pi(Y)]P + pi(Z)[pi(Y)X - pi(X)Y].
    """
    lc = riemann(spec, p, "lc")
    vf = _require_torsion(spec)
    D, P, g = covariant_derivative_field(spec, p, vf)
    n = len(P)
    eye = np.eye(n)
    pi = g @ P
    piP = float(pi @ P)
    Dl = g @ D  # Dl[k, i] = g(d_k, nabla_i P)
    R = lc.riemann.copy()
    R += np.einsum("ki,lj->lijk", Dl, eye) - np.einsum("kj,li->lijk", Dl, eye)
    R += np.einsum("ik,lj->lijk", g, D) - np.einsum("jk,li->lijk", g, D)
    R += piP * (np.einsum("ik,lj->lijk", g, eye) - np.einsum("jk,li->lijk", g, eye))
    R += np.einsum("jk,i,l->lijk", g, pi, P) - np.einsum("ik,j,l->lijk", g, pi, P)
    R += np.einsum("k,j,li->lijk", pi, pi, eye) - np.einsum("k,i,lj->lijk", pi, pi, eye)
    ric = ricci_from_riemann(R, g, lc.frame, lc.eps)
    gam = christoffel(spec, p, "ss").total
    return CurvatureAtPoint("ss", lc.point, g, gam, R, ric,
                            scalar_from_ricci(ric, lc.frame, lc.eps), lc.frame, lc.eps)


def orthonormal_frame(g: np.ndarray, signature: Sequence[int] | None = None,
                      basis: np.ndarray | None = None, tol: float = 1e-12):
    """Signature-aware modified Gram-Schmidt.

    Returns ``(E, eps)`` with frame vectors as columns of ``E`` and
    ``g(E_a, E_b) = eps_a delta_ab``.  At each step the remaining candidate
    with the largest ``|g(v, v)|`` is taken, which sidesteps null vectors.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    cand = [c.copy() for c in (np.eye(n) if basis is None else np.asarray(basis, float)).T]
    frame, eps = [], []
    for _ in range(n):
        norms = [c @ g @ c for c in cand]
        j = int(np.argmax(np.abs(norms)))
        q = norms[j]
        if abs(q) <= tol * max(1.0, np.abs(g).max()):
            raise SignatureError("metric is degenerate; no orthonormal frame")
        e = cand.pop(j) / np.sqrt(abs(q))
        s = 1.0 if q > 0 else -1.0
        frame.append(e)
        eps.append(s)
        cand = [c - s * (e @ g @ c) * e for c in cand]
    E = np.array(frame).T
    eps = np.array(eps)
    if signature is not None and sorted(eps.astype(int)) != sorted(int(x) for x in signature):
        raise SignatureError(f"frame signs {eps.astype(int).tolist()} disagree with signature {list(signature)}")
    return E, eps


def first_bianchi_residual(R: np.ndarray) -> float:
    cyc = R + np.einsum("ljki->lijk", R) + np.einsum("lkij->lijk", R)
    return float(np.abs(cyc).max())
