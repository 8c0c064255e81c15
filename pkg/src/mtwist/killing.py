"""Lie derivatives of product metrics, Killing residuals and model Killing families."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import ProductSpec, make_spec, sample_grid
from .errors import PreconditionError
from .expr import Expr, ZERO, parse_expr
from .oracle import VectorField, covariant_derivative_field, metric_field, orthonormal_frame
from .twisted import _factor_specs

__all__ = [
    "VectorFieldSpec", "vector_field", "lie_derivative_metric", "LieDerivative", "killing_residual",
    "conformal_factor_check", "hessian_condition_residual", "curl_and_nonrotating",
    "killing_necessary_quantity", "KillingFamily", "constant_warp_family",
    "linear_warp_family", "non_rotating_family", "non_rotating_family_printed",
    "non_killing_library",
]


@dataclass(frozen=True)
class VectorFieldSpec:
    """Vector field on the product; each component may depend on every coordinate."""

    components: tuple[Expr, ...]
    name: str = "K"

    def blocks(self, spec: ProductSpec) -> list[int]:
        out = []
        for blk, sl in enumerate(spec.block_slices()):
            if any(c != ZERO for c in self.components[sl]):
                out.append(blk - 1)
        return out


def vector_field(spec: ProductSpec, components, name: str = "K") -> VectorFieldSpec:
    """Bind component expressions (strings or :class:`Expr`) to the product coordinates."""
    comps = tuple(c if isinstance(c, Expr) else parse_expr(str(c), spec.coords) for c in components)
    if len(comps) != spec.dim:
        raise PreconditionError(f"field needs {spec.dim} components, got {len(comps)}")
    return VectorFieldSpec(comps, name)


def _as_field(spec, K) -> VectorFieldSpec:
    if isinstance(K, VectorFieldSpec):
        return K
    if isinstance(K, str):
        return VectorFieldSpec(spec.fields[K], K)
    return vector_field(spec, K)


def _lie(g, dg, K, dK):
    # (L_K g)_ab = K^c d_c g_ab + g_cb d_a K^c + g_ac d_b K^c
    return (np.einsum("...c,...abc->...ab", K, dg)
            + np.einsum("...cb,...ca->...ab", g, dK)
            + np.einsum("...ac,...cb->...ab", g, dK))


@dataclass
class LieDerivative:
    generic: np.ndarray
    structured: np.ndarray | None
    difference: float | None


def _structured_lie(spec: ProductSpec, K: VectorFieldSpec, p) -> np.ndarray | None:
    """Product formula for fields tangent to one factor and depending only on it."""
    blocks = K.blocks(spec)
    if len(blocks) != 1:
        return None
    blk = blocks[0]
    sl = spec.block_slices()
    own = set(spec.base.coords if blk == -1 else spec.fibers[blk].coords)
    comps = K.components[sl[blk + 1]]
    if any(not c.free_vars() <= own for c in comps):
        return None
    p = np.asarray(p, float)
    base_spec, fiber_specs = _factor_specs(spec)
    out = np.zeros((spec.dim, spec.dim))
    env = spec.env(p)
    if blk == -1:
        mf = metric_field(base_spec)
        xb = p[sl[0]]
        gB, dgB, _ = mf.jets(xb, order=1)
        X, dX, _ = VectorField(comps, spec.base.coords).jets(xb, order=1)
        out[sl[0], sl[0]] = _lie(gB, dgB, X, dX)
        for i, f in enumerate(spec.fibers):
            jet = spec.warp(i).jet(env, list(spec.base.coords), order=1)
            Xb2 = float(2 * jet.v * (jet.gradient @ X))
            out[sl[i + 1], sl[i + 1]] = Xb2 * metric_field(fiber_specs[i]).value(p[sl[i + 1]])
        return out
    i = blk
    s = sl[i + 1]
    mf = metric_field(fiber_specs[i])
    gF, dgF, _ = mf.jets(p[s], order=1)
    U, dU, _ = VectorField(comps, spec.fibers[i].coords).jets(p[s], order=1)
    jet = spec.warp(i).jet(env, list(spec.fibers[i].coords), order=1)
    b = float(jet.v)
    Ub2 = float(2 * b * (jet.gradient @ U))
    out[s, s] = b**2 * _lie(gF, dgF, U, dU) + Ub2 * gF
    return out


def lie_derivative_metric(spec: ProductSpec, K, p) -> LieDerivative:
    """``L_K g`` from the coordinate formula, plus the product formula for single-factor fields."""
    K = _as_field(spec, K)
    g, dg, _ = metric_field(spec).jets(p, order=1)
    V, dV, _ = VectorField(K.components, spec.coords).jets(p, order=1)
    gen = _lie(g, dg, V, dV)
    st = _structured_lie(spec, K, p)
    diff = None if st is None else float(np.abs(gen - st).max())
    return LieDerivative(gen, st, diff)


def killing_residual(spec: ProductSpec, K, grid=None, per_axis: int = 5) -> dict:
    """Largest entry of ``L_K g`` over the grid, with the point where it occurs."""
    K = _as_field(spec, K)
    pts = sample_grid(spec.domain_box, per_axis) if grid is None else np.atleast_2d(np.asarray(grid, float))
    g, dg, _ = metric_field(spec).jets(pts, order=1)
    V, dV, _ = VectorField(K.components, spec.coords).jets(pts, order=1)
    L = np.abs(_lie(g, dg, V, dV)).reshape(len(pts), -1).max(axis=1)
    k = int(np.argmax(L))
    return {"max_abs": float(L[k]), "worst_point": pts[k].tolist()}


def conformal_factor_check(spec: ProductSpec, fiber_index: int, U, grid=None, per_axis: int = 5,
                           tol: float = 1e-8, base_field=None) -> dict:
    """Test ``L_U g_F = 2 sigma g_F`` for a field ``U`` on one fiber.

    ``U`` gives fiber components over that fiber's coordinates.  With
    ``base_field`` (base components over base coordinates) the measured
    ``2 sigma`` is also compared with the factor that makes ``X + U`` Killing
    on the product, ``-(X(b^2) + U(b^2)) / b^2``.
    """
    f = spec.fibers[fiber_index]
    comps = [c if isinstance(c, Expr) else parse_expr(str(c), f.coords) for c in U]
    fspec = _factor_specs(spec)[1][fiber_index]
    sl = spec.fiber_slice(fiber_index)
    pts = sample_grid(spec.domain_box, per_axis) if grid is None else np.atleast_2d(np.asarray(grid, float))
    xs = pts[:, sl]
    g, dg, _ = metric_field(fspec).jets(xs, order=1)
    V, dV, _ = VectorField(comps, f.coords).jets(xs, order=1)
    L = _lie(g, dg, V, dV)
    sigma = np.einsum("nab,nab->n", np.linalg.inv(g), L) / (2 * f.dim)
    dev = np.abs(L - 2 * sigma[:, None, None] * g).reshape(len(pts), -1).max(axis=1)
    k = int(np.argmax(dev))
    out = {"is_conformal": bool(dev[k] < tol), "max_deviation": float(dev[k]),
           "witness": pts[k].tolist(), "sigma": sigma.tolist()}
    if base_field is not None:
        X = [c if isinstance(c, Expr) else parse_expr(str(c), spec.base.coords) for c in base_field]
        names = list(spec.base.coords) + list(f.coords)
        env = spec.env(pts)
        jet = spec.warp(fiber_index).jet(env, names, order=1)
        b = np.broadcast_to(jet.v, (len(pts),))
        grad = jet.gradient
        Xv, _, _ = VectorField(X, spec.base.coords).jets(pts[:, spec.base_slice], order=1)
        dirs = np.concatenate([Xv, V], axis=1)
        predicted = -2 * b * np.einsum("na,na->n", grad, dirs) / b**2
        out["factor_mismatch"] = float(np.abs(2 * sigma - predicted).max())
    return out


def hessian_condition_residual(spec: ProductSpec, fiber_index: int, mu, C: float, grid=None,
                               per_axis: int = 5) -> float:
    """Max entry of ``Hess_F mu + C mu g_F`` over the fiber coordinates of the grid."""
    f = spec.fibers[fiber_index]
    mu = mu if isinstance(mu, Expr) else parse_expr(str(mu), f.coords)
    fspec = _factor_specs(spec)[1][fiber_index]
    sl = spec.fiber_slice(fiber_index)
    pts = sample_grid(spec.domain_box, per_axis) if grid is None else np.atleast_2d(np.asarray(grid, float))
    xs = pts[:, sl]
    g, dg, _ = metric_field(fspec).jets(xs, order=1)
    from .oracle import _gamma
    G = _gamma(np.linalg.inv(g), dg)
    env = {c: xs[:, i] for i, c in enumerate(f.coords)}
    j = mu.jet(env, f.coords, order=2)
    n, l = len(xs), f.dim
    m = np.broadcast_to(j.v, (n,))
    grad = np.broadcast_to(j.gradient, (n, l))
    hess = np.broadcast_to(j.hessian, (n, l, l)) - np.einsum("nkab,nk->nab", G, grad)
    return float(np.abs(hess + C * m[:, None, None] * g).max())


def curl_and_nonrotating(spec: ProductSpec, K, grid=None, per_axis: int = 5) -> dict:
    """Frame components of ``curl K`` and of ``nabla K``; parallel means both vanish."""
    K = _as_field(spec, K)
    pts = sample_grid(spec.domain_box, per_axis) if grid is None else np.atleast_2d(np.asarray(grid, float))
    max_curl = max_nabla = 0.0
    vf = VectorField(K.components, spec.coords)
    for p in pts:
        D, _, g = covariant_derivative_field(spec, p, vf)
        E, _ = orthonormal_frame(g)
        low = g @ D  # low[b, a] = g(nabla_a K, d_b)
        curl = low - low.T  # curl[b, a] = g(nabla_a K, d_b) - g(nabla_b K, d_a)
        max_curl = max(max_curl, float(np.abs(E.T @ curl @ E).max()))
        max_nabla = max(max_nabla, float(np.abs(E.T @ low @ E).max()))
    return {"max_curl": max_curl, "max_nabla": max_nabla, "is_parallel": max_nabla < 1e-8}


def killing_necessary_quantity(f, f1, ts) -> dict:
    """Values of ``(f' / (f f1))' f^2 / f1`` along ``ts``; constant when Killing fields exist."""
    f = f if isinstance(f, Expr) else parse_expr(str(f), ["t"])
    f1 = f1 if isinstance(f1, Expr) else parse_expr(str(f1), ["t"])
    ts = np.asarray(ts, float)
    env = {"t": ts}
    jf = f.jet(env, ["t"], order=2)
    j1 = f1.jet(env, ["t"], order=1)
    F, F1, F2 = jf.v, jf.gradient[..., 0], jf.hessian[..., 0, 0]
    H, H1 = np.broadcast_to(j1.v, ts.shape), j1.gradient[..., 0]
    # q = f' / (f f1);  q' = f''/(f f1) - f'(f' f1 + f f1')/(f f1)^2
    dq = F2 / (F * H) - F1 * (F1 * H + F * H1) / (F * H) ** 2
    vals = dq * F**2 / H
    return {"values": vals.tolist(), "variance": float(np.var(vals)), "constant": float(np.mean(vals))}


# ---------------------------------------------------------------------------
# model families


@dataclass
class KillingFamily:
    spec: ProductSpec
    field: VectorFieldSpec
    params: dict


def _num(x: float) -> str:
    return repr(float(x))


def constant_warp_family(l0: float = 1.5, k0: float = 0.7, kbar: float = -0.4, slope=(0.8, -0.3),
                         offset: float = 0.2, t0: float = 0.1, rotation: float = 0.5) -> KillingFamily:
    """``-dt^2 + ds^2 + l0^2 (dx^2 + dy^2)`` with a boost-type Killing field.

    ``mu_1 = slope . (x, y) + offset`` has vanishing Hessian and the fiber
    part adds a rotation of the flat plane.
    """
    a, b = slope
    spec = make_spec([["-1", "0"], ["0", "1"]], ["t", "s"],
                     [("F", 2, ["x", "y"], [["1", "0"], ["0", "1"]])], [_num(l0)])
    mu1 = f"({_num(a)}*x + {_num(b)}*y + {_num(offset)})"
    c = 1 / l0**2
    comps = [f"{mu1} + s*{_num(k0)}", f"{_num(kbar)} + t*{_num(k0)}",
             f"{_num(a * c)}*(t - {_num(t0)}) - {_num(rotation)}*y",
             f"{_num(b * c)}*(t - {_num(t0)}) + {_num(rotation)}*x"]
    return KillingFamily(spec, vector_field(spec, comps),
                         dict(l0=l0, k0=k0, kbar=kbar, slope=slope, offset=offset, t0=t0, rotation=rotation))


def linear_warp_family(A: float = 0.5, B: float = 2.0, c1: float = 0.4, c3: float = 0.3,
                       lam: float | None = None, lam_tilde: float = 0.2, translation: float = 0.0,
                       box=None) -> KillingFamily:
    """``-dt^2 + ds^2 + (A t + B)^2 dx^2`` with the field built from ``mu = c e^{A x}``.

    Both potentials solve ``mu'' = A^2 mu`` on the flat line.  The ``s``
    component carries ``(lam + t) mu_3``; it is Killing only for
    ``lam = B / A``, which is the default.
    """
    lam = B / A if lam is None else lam
    box = box or [[0.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]]
    spec = make_spec([["-1", "0"], ["0", "1"]], ["t", "s"], [("F", 1, ["x"], [["1"]])],
                     [f"{_num(A)}*t + {_num(B)}"], domain_box=box)
    mu1 = f"{_num(c1)}*exp({_num(A)}*x)"
    mu3 = f"{_num(c3)}*exp({_num(A)}*x)"
    g1 = f"{_num(c1 * A)}*exp({_num(A)}*x)"
    g3 = f"{_num(c3 * A)}*exp({_num(A)}*x)"
    den = f"({_num(A)}*({_num(A)}*t + {_num(B)}))"
    comps = [f"{mu1} + s*{mu3}", f"({_num(lam)} + t)*{mu3} + {_num(lam_tilde)}",
             f"-s/{den}*{g3} - {g1}/{den} + {_num(translation)}"]
    return KillingFamily(spec, vector_field(spec, comps),
                         dict(A=A, B=B, c1=c1, c3=c3, lam=lam, lam_tilde=lam_tilde))


def _non_rotating_spec(f1: float, k: float, r0: float, sign: float, box):
    f = f"{_num(sign * f1 * k)}*t + {_num(r0)}"
    spec = make_spec([[f"-{_num(f1 ** 2)}"]], ["t"], [("F", 1, ["x"], [["1"]])], [f], domain_box=box)
    return spec, f


def non_rotating_family(f1: float = 1.3, C: float = -0.49, r0: float = 1.0, sign: float = 1.0,
                        amp: float = 0.6, box=None) -> KillingFamily:
    """``-f1^2 dt^2 + f^2 dx^2`` with ``f = +-f1 sqrt(-C) t + r0`` and a parallel Killing field.

    ``mu = amp cosh(sqrt(-C) x)`` solves ``mu'' + C mu = 0``.  The field is
    ``mu / f1 d_t - f1 / (f f') grad mu``.
    """
    if C >= 0:
        raise PreconditionError("the non-rotating family needs C < 0")
    k = np.sqrt(-C)
    box = box or [[0.0, 1.0], [-1.0, 1.0]]
    spec, f = _non_rotating_spec(f1, k, r0, sign, box)
    fp = sign * f1 * k
    mu = f"{_num(amp)}*cosh_x"
    cosh = f"(exp({_num(k)}*x) + exp(-{_num(k)}*x))/2"
    sinh = f"(exp({_num(k)}*x) - exp(-{_num(k)}*x))/2"
    mu = mu.replace("cosh_x", cosh)
    grad = f"{_num(amp * k)}*{sinh}"
    comps = [f"{mu}/{_num(f1)}", f"-{_num(f1 / fp)}*{grad}/({f})"]
    return KillingFamily(spec, vector_field(spec, comps), dict(f1=f1, C=C, r0=r0, sign=sign, amp=amp))


def non_rotating_family_printed(f1: float = 1.3, C: float = -0.49, r0: float = 1.0, sign: float = 1.0,
                                amp: float = 0.6, box=None) -> KillingFamily:
    """Same spacetime with the fiber part written as ``grad mu / (f1 C t + r0)``."""
    k = np.sqrt(-C)
    box = box or [[0.0, 1.0], [-1.0, 1.0]]
    spec, _ = _non_rotating_spec(f1, k, r0, sign, box)
    cosh = f"(exp({_num(k)}*x) + exp(-{_num(k)}*x))/2"
    sinh = f"(exp({_num(k)}*x) - exp(-{_num(k)}*x))/2"
    comps = [f"{_num(amp)}*{cosh}/{_num(f1)}",
             f"{_num(amp * k)}*{sinh}/({_num(f1 * C)}*t + {_num(r0)})"]
    return KillingFamily(spec, vector_field(spec, comps), dict(f1=f1, C=C, r0=r0, sign=sign, amp=amp))


def non_killing_library() -> list[KillingFamily]:
    """Fields that are not Killing on their spacetimes, for negative checks."""
    grw = make_spec([["-1"]], ["t"], [("F", 2, ["x", "y"], [["1", "0"], ["0", "1"]])], ["exp(t)"])
    flat = make_spec([["-1", "0"], ["0", "1"]], ["t", "s"], [("F", 1, ["x"], [["1"]])], ["1"])
    tw = make_spec([["-1"]], ["t"], [("F", 1, ["x"], [["1"]])], ["exp(t + 0.3*x^2)"])
    out = [
        KillingFamily(grw, vector_field(grw, ["t", "0", "0"], "t d_t"), {}),
        KillingFamily(grw, vector_field(grw, ["1", "0", "0"], "d_t"), {}),
        KillingFamily(flat, vector_field(flat, ["0", "s^2", "0"], "s^2 d_s"), {}),
        KillingFamily(flat, vector_field(flat, ["0", "0", "x"], "x d_x"), {}),
        KillingFamily(tw, vector_field(tw, ["0", "1"], "d_x"), {}),
    ]
    return out
