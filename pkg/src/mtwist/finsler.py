"""Finsler fundamental tensors, sprays and Berwald/Cartan tensors, for single
Finsler metrics and for twisted products

    F^2 = F_0^2(x_0, y_0) + sum_l f_l(x_0, x_l)^2 F_l^2(x_l, y_l).

Everything is driven by the squared norm ``L = F^2``.  Its first and second
x/y derivatives are taken symbolically once; y-dependence is then pushed
through third-order jets so that spray derivatives up to ``d^3 G / dy^3``
(the Berwald tensor) come out exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateFundamentalTensor, DimensionError, SpecError
from .expr import Call, Expr, Pow, parse_expr, substitute
from .jets import Jet, constant, variable

__all__ = [
    "FinslerMetric", "FinslerFactor", "ProductFinslerSpec", "fundamental_tensor",
    "spray_generic", "spray_structured", "berwald_tensors", "cartan_tensor",
    "cartan_blocks", "structure_predicates", "sample_points", "riemannian_factor",
    "quartic_factor", "randers_factor", "load_finsler", "COND_LIMIT",
]

# fundamental tensors with a larger condition number count as degenerate
COND_LIMIT = 1e12


def _square(F: Expr) -> Expr:
    """Symbolic ``F^2`` that avoids differentiating through a square root."""
    if isinstance(F, Call) and F.func == "sqrt":
        return F.arg
    if isinstance(F, Pow):
        e = 2 * F.exponent
        return F.base if e == 1.0 else Pow(F.base, e)
    return F * F


# ---------------------------------------------------------------------------
# jet-valued linear algebra
#
# A "stacked jet" is a tuple (v, d1, d2, d3) with value shape S followed by
# 0..3 derivative axes of length k.


def _stack(jets: Sequence, shape: tuple[int, ...], k: int):
    flat = [j if isinstance(j, Jet) else constant(j, k) for j in jets]
    v = np.array([j.v for j in flat], float).reshape(shape)
    d1 = np.array([np.broadcast_to(j.d1, (k,)) for j in flat]).reshape(shape + (k,))
    d2 = np.array([np.broadcast_to(j.d2, (k, k)) for j in flat]).reshape(shape + (k, k))
    d3 = np.array([np.broadcast_to(j.d3, (k, k, k)) for j in flat]).reshape(shape + (k, k, k))
    return v, d1, d2, d3


def _solve_stacked(A, b):
    """Taylor coefficients of ``x = A^{-1} b`` from those of ``A`` and ``b``."""
    A0, A1, A2, A3 = A
    b0, b1, b2, b3 = b
    inv = np.linalg.inv(A0)
    x0 = inv @ b0
    x1 = inv @ (b1 - np.einsum("ija,j->ia", A1, x0))
    t2 = b2 - np.einsum("ijab,j->iab", A2, x0) - np.einsum("ija,jb->iab", A1, x1)
    t2 = t2 - np.einsum("ijb,ja->iab", A1, x1)
    x2 = np.einsum("ij,jab->iab", inv, t2)
    t3 = b3 - np.einsum("ijabc,j->iabc", A3, x0)
    t3 = t3 - (np.einsum("ijab,jc->iabc", A2, x1) + np.einsum("ijac,jb->iabc", A2, x1)
               + np.einsum("ijbc,ja->iabc", A2, x1))
    t3 = t3 - (np.einsum("ija,jbc->iabc", A1, x2) + np.einsum("ijb,jac->iabc", A1, x2)
               + np.einsum("ijc,jab->iabc", A1, x2))
    x3 = np.einsum("ij,jabc->iabc", inv, t3)
    return x0, x1, x2, x3


def _check_fundamental(g: np.ndarray, where) -> None:
    if not np.all(np.isfinite(g)):
        raise DegenerateFundamentalTensor(f"non-finite fundamental tensor at {where}")
    s = np.linalg.svd(g, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > COND_LIMIT:
        raise DegenerateFundamentalTensor(f"fundamental tensor degenerate at {where}")


# ---------------------------------------------------------------------------


class FinslerMetric:
    """A Finsler metric given by ``L = F^2`` in coordinates ``(x, y)``."""

    def __init__(self, L: Expr, xs: Sequence[str], ys: Sequence[str]):
        self.L = L
        self.xs = tuple(xs)
        self.ys = tuple(ys)
        if len(self.xs) != len(self.ys):
            raise DimensionError("x and y coordinate lists must have equal length")
        self.dim = len(self.xs)

    @classmethod
    def from_norm(cls, F: Expr | str, xs, ys) -> "FinslerMetric":
        F = parse_expr(F, scope=list(xs) + list(ys)) if isinstance(F, str) else F
        return cls(_square(F), xs, ys)

    # symbolic pieces, built lazily
    @cached_property
    def L_y(self) -> list[Expr]:
        return [self.L.diff(y) for y in self.ys]

    @cached_property
    def L_yy(self) -> list[list[Expr]]:
        return [[self.L_y[i].diff(y) for y in self.ys] for i in range(self.dim)]

    @cached_property
    def L_x(self) -> list[Expr]:
        return [self.L.diff(x) for x in self.xs]

    @cached_property
    def L_xy(self) -> list[list[Expr]]:
        # L_xy[k][l] = d^2 L / dx^k dy^l
        return [[self.L_x[k].diff(y) for y in self.ys] for k in range(self.dim)]

    def env(self, x, y, order: int | None = 3) -> dict:
        """Evaluation environment; with ``order`` set, y entries are seeded jets."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if x.shape != (self.dim,) or y.shape != (self.dim,):
            raise DimensionError(f"expected points of dimension {self.dim}")
        e: dict = {}
        k = self.dim
        for i, name in enumerate(self.xs):
            e[name] = float(x[i]) if order is None else constant(float(x[i]), k, order)
        for i, name in enumerate(self.ys):
            e[name] = float(y[i]) if order is None else variable(float(y[i]), i, k, order)
        return e

    def norm(self, x, y) -> float:
        return float(np.sqrt(self.L.evaluate(self.env(x, y, None))))

    @staticmethod
    def _eval(e: Expr, env):
        return e.evaluate(env)

    def fundamental_stacked(self, x, y):
        env = self.env(x, y)
        jets = [self._eval(self.L_yy[i][j], env) * 0.5 for i in range(self.dim) for j in range(self.dim)]
        return _stack(jets, (self.dim, self.dim), self.dim)

    def fundamental(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        env = self.env(x, y, None)
        g = np.array([[float(self.L_yy[i][j].evaluate(env)) / 2 for j in range(self.dim)]
                      for i in range(self.dim)])
        _check_fundamental(g, (tuple(np.asarray(x)), tuple(np.asarray(y))))
        return g, np.linalg.inv(g)

    def spray_stacked(self, x, y):
        """Stacked jet (in y) of the spray coefficients."""
        env = self.env(x, y)
        n = self.dim
        A = self.fundamental_stacked(x, y)
        _check_fundamental(A[0], (tuple(np.asarray(x)), tuple(np.asarray(y))))
        h = []
        for l in range(n):
            acc = -self._eval(self.L_x[l], env)
            for k in range(n):
                acc = acc + self._eval(self.L_xy[k][l], env) * env[self.ys[k]]
            h.append(acc * 0.25)
        b = _stack(h, (n,), n)
        return _solve_stacked(A, b)

    def spray(self, x, y) -> np.ndarray:
        return self.spray_stacked(x, y)[0]


@dataclass(frozen=True)
class FinslerFactor:
    name: str
    xs: tuple[str, ...]
    ys: tuple[str, ...]
    F: Expr

    @property
    def dim(self) -> int:
        return len(self.xs)

    @cached_property
    def metric(self) -> FinslerMetric:
        return FinslerMetric(_square(self.F), self.xs, self.ys)

    def to_dict(self) -> dict:
        return {"name": self.name, "x": list(self.xs), "y": list(self.ys), "F": str(self.F)}


def make_factor(name: str, xs, ys, F: str | Expr) -> FinslerFactor:
    xs, ys = tuple(xs), tuple(ys)
    if len(xs) != len(ys):
        raise DimensionError("x and y coordinate lists must have equal length")
    if isinstance(F, str):
        F = parse_expr(F, scope=list(xs) + list(ys))
    return FinslerFactor(name, xs, ys, F)


@dataclass(frozen=True)
class ProductFinslerSpec:
    base: FinslerFactor
    fibers: tuple[FinslerFactor, ...]
    twists: tuple[Expr, ...]  # f_l over base x and fiber-l x
    x_box: np.ndarray  # (dim, 2)

    @property
    def dims(self) -> list[int]:
        return [self.base.dim] + [f.dim for f in self.fibers]

    @property
    def dim(self) -> int:
        return sum(self.dims)

    @property
    def slices(self) -> list[slice]:
        out, s = [], 0
        for d in self.dims:
            out.append(slice(s, s + d))
            s += d
        return out

    @property
    def xs(self) -> tuple[str, ...]:
        return self.base.xs + tuple(c for f in self.fibers for c in f.xs)

    @property
    def ys(self) -> tuple[str, ...]:
        return self.base.ys + tuple(c for f in self.fibers for c in f.ys)

    @cached_property
    def product_metric(self) -> FinslerMetric:
        L = _square(self.base.F)
        for f, tw in zip(self.fibers, self.twists):
            L = L + Pow(tw, 2.0) * _square(f.F)
        return FinslerMetric(L, self.xs, self.ys)

    def to_dict(self) -> dict:
        return {
            "finsler": True,
            "base": self.base.to_dict(),
            "fibers": [f.to_dict() for f in self.fibers],
            "twists": [str(t) for t in self.twists],
            "x_box": np.asarray(self.x_box).tolist(),
        }


def make_product(base: FinslerFactor, fibers: Sequence[FinslerFactor], twists: Sequence[str | Expr],
                 x_box=None) -> ProductFinslerSpec:
    fibers = tuple(fibers)
    if len(twists) != len(fibers):
        raise SpecError(f"{len(fibers)} fibers but {len(twists)} twisting functions")
    names = list(base.xs) + list(base.ys) + [c for f in fibers for c in f.xs + f.ys]
    if len(set(names)) != len(names):
        raise SpecError("coordinate names must be unique across factors")
    tw = []
    for f, t in zip(fibers, twists):
        tw.append(parse_expr(t, scope=list(base.xs) + list(f.xs)) if isinstance(t, str) else t)
    n = base.dim + sum(f.dim for f in fibers)
    box = np.array(x_box if x_box is not None else [[-0.5, 0.5]] * n, float)
    if box.shape != (n, 2):
        raise SpecError("x_box must give [lo, hi] per base and fiber x coordinate")
    return ProductFinslerSpec(base, fibers, tuple(tw), box)


def load_finsler(d: Mapping) -> ProductFinslerSpec:
    """Build a product from its JSON dictionary (``finsler: true`` documents)."""
    try:
        def fac(e, default):
            return make_factor(e.get("name", default), e["x"], e["y"], e["F"])
        base = fac(d["base"], "M0")
        fibers = [fac(f, f"M{i + 1}") for i, f in enumerate(d.get("fibers", []))]
        return make_product(base, fibers, d.get("twists", []), d.get("x_box"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed Finsler spec: {exc}") from exc


def _as_metric(obj) -> FinslerMetric:
    if isinstance(obj, FinslerMetric):
        return obj
    if isinstance(obj, FinslerFactor):
        return obj.metric
    if isinstance(obj, ProductFinslerSpec):
        return obj.product_metric
    raise TypeError(f"not a Finsler metric: {obj!r}")


# ---------------------------------------------------------------------------
# generic quantities


def fundamental_tensor(F, x, y) -> tuple[np.ndarray, np.ndarray]:
    """``g_ij = (1/2) d^2 F^2 / dy^i dy^j`` and its inverse."""
    return _as_metric(F).fundamental(x, y)


def spray_generic(F, x, y) -> np.ndarray:
    """Geodesic spray coefficients ``G^i`` from the mixed jets of ``F^2``."""
    return _as_metric(F).spray(x, y)


def berwald_tensors(F, x, y) -> dict:
    """y-derivatives of the spray up to third order, and the mean Berwald tensor.

    Index layout: ``G_j[i, j]``, ``G_jk[i, j, k]``, ``B[i, j, k, l]`` with the
    upper index first; ``E[j, k] = (1/2) sum_i B[i, j, k, i]``.
    """
    G, G1, G2, G3 = _as_metric(F).spray_stacked(x, y)
    return {"G": G, "G_j": G1, "G_jk": G2, "B": G3, "E": 0.5 * np.einsum("ijki->jk", G3)}


def cartan_tensor(F, x, y) -> np.ndarray:
    """``C_ijk = (1/2) d g_ij / dy^k``."""
    _, g1, _, _ = _as_metric(F).fundamental_stacked(x, y)
    return 0.5 * g1


# ---------------------------------------------------------------------------
# structured product quantities


def _twist_jets(spec: ProductFinslerSpec, l: int, x):
    """``f_l^2`` and its gradient in (base x, fiber-l x)."""
    sl0, sll = spec.slices[0], spec.slices[l + 1]
    names = spec.base.xs + spec.fibers[l].xs
    vals = np.concatenate([np.asarray(x)[sl0], np.asarray(x)[sll]])
    j = spec.twists[l].jet(dict(zip(names, vals)), names, order=1)
    f2 = float(j.v) ** 2
    grad = 2 * float(j.v) * np.asarray(j.d1, float)
    m0 = spec.base.dim
    return f2, grad[:m0], grad[m0:]


def spray_structured(spec: ProductFinslerSpec, x, y) -> np.ndarray:
    """Spray of the twisted product assembled blockwise from the factor sprays.

    Base block: ``G_0 - (1/4) sum_l g_0^{-1} d_0(f_l^2) F_l^2``.  Fiber block
    ``l``: ``G_l + (y_0 . d_0 f_l^2) y_l / (2 f_l^2) + (y_l . d_l f_l^2) y_l / (2 f_l^2)
    - g_l^{-1} d_l(f_l^2) F_l^2 / (4 f_l^2)``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sl = spec.slices
    x0, y0 = x[sl[0]], y[sl[0]]
    base = spec.base.metric
    _, g0inv = base.fundamental(x0, y0)
    out = np.zeros(spec.dim)
    out[sl[0]] = base.spray(x0, y0)
    for l, fib in enumerate(spec.fibers):
        xl, yl = x[sl[l + 1]], y[sl[l + 1]]
        f2, d0, dl = _twist_jets(spec, l, x)
        Fl2 = fib.metric.norm(xl, yl) ** 2
        _, glinv = fib.metric.fundamental(xl, yl)
        out[sl[0]] -= 0.25 * (g0inv @ d0) * Fl2
        Gl = fib.metric.spray(xl, yl)
        Gl = Gl + (y0 @ d0) * yl / (2 * f2) + (yl @ dl) * yl / (2 * f2) - (glinv @ dl) * Fl2 / (4 * f2)
        out[sl[l + 1]] = Gl
    return out


def cartan_blocks(spec: ProductFinslerSpec, x, y) -> dict:
    """Generic Cartan tensor of the product next to its predicted block form.

    Prediction: the base diagonal block is the base Cartan tensor, fiber
    diagonal blocks are ``f_l^2`` times the fiber Cartan tensor, and every
    block mixing factors vanishes.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    C = cartan_tensor(spec, x, y)
    pred = np.zeros_like(C)
    sl = spec.slices
    pred[sl[0], sl[0], sl[0]] = cartan_tensor(spec.base, x[sl[0]], y[sl[0]])
    for l, fib in enumerate(spec.fibers):
        f2, _, _ = _twist_jets(spec, l, x)
        s = sl[l + 1]
        pred[s, s, s] = f2 * cartan_tensor(fib, x[s], y[s])
    mask = np.zeros(C.shape, bool)
    for s in sl:
        mask[s, s, s] = True
    return {
        "generic": C,
        "structured": pred,
        "max_difference": float(np.abs(C - pred).max()),
        "max_mixed_block": float(np.abs(C[~mask]).max()) if (~mask).any() else 0.0,
    }


# ---------------------------------------------------------------------------
# sampling and predicates


def sample_points(spec: ProductFinslerSpec, n: int, seed: int = 0, y_radius=(0.5, 2.0)):
    """``n`` pairs (x, y): x uniform in the box, y in a punctured shell per factor."""
    rng = np.random.default_rng(seed)
    box = np.asarray(spec.x_box)
    xs = rng.uniform(box[:, 0], box[:, 1], size=(n, spec.dim))
    ys = np.zeros((n, spec.dim))
    for s in spec.slices:
        d = s.stop - s.start
        u = rng.normal(size=(n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        ys[:, s] = u * rng.uniform(*y_radius, size=(n, 1))
    return list(zip(xs, ys))


@dataclass
class Predicate:
    name: str
    holds: bool
    max_residual: float
    witness: tuple | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "holds": self.holds, "max_residual": self.max_residual,
                "witness": None if self.witness is None else [list(map(float, w)) for w in self.witness]}


def _track(name, tol):
    state = {"r": 0.0, "w": None}

    def add(value, x, y):
        v = float(value)
        if v > state["r"] or state["w"] is None:
            state["r"] = max(v, state["r"])
            state["w"] = (np.asarray(x), np.asarray(y))

    def done():
        holds = state["r"] <= tol
        return Predicate(name, holds, state["r"], None if holds else state["w"])
    return add, done


def _restricted(spec: ProductFinslerSpec, l: int, x) -> FinslerMetric:
    """``(M_l, f_l F_l)`` with the base point frozen at ``x``'s base block."""
    fib = spec.fibers[l]
    x0 = np.asarray(x)[spec.slices[0]]
    tw = substitute(spec.twists[l], dict(zip(spec.base.xs, map(float, x0))))
    return FinslerMetric(Pow(tw, 2.0) * _square(fib.F), fib.xs, fib.ys)


def _dually_flat_residual(m: FinslerMetric, x, y) -> float:
    env = m.env(x, y, None)
    n = m.dim
    r = 0.0
    for l in range(n):
        lhs = sum(float(m.L_xy[k][l].evaluate(env)) * y[k] for k in range(n))
        r = max(r, abs(lhs - 2 * float(m.L_x[l].evaluate(env))))
    return r


def _x_gradient(m: FinslerMetric, x, y) -> float:
    env = m.env(x, y, None)
    return max((abs(float(e.evaluate(env))) for e in m.L_x), default=0.0)


def _weak_berwald_balance(spec: ProductFinslerSpec, l: int, x, y) -> float:
    """Residual of the fiber condition paired with the mean Berwald tensor."""
    fib = spec.fibers[l].metric
    s = spec.slices[l + 1]
    xl, yl = np.asarray(x)[s], np.asarray(y)[s]
    f2, _, dl = _twist_jets(spec, l, x)
    E = berwald_tensors(fib, xl, yl)["E"]
    A = fib.fundamental_stacked(xl, yl)
    n = fib.dim
    # third y-derivatives of g^{k beta} L via Taylor coefficients of the inverse
    inv = [_solve_stacked(A, _unit_stacked(n, b)) for b in range(n)]
    env = fib.env(xl, yl)
    Lj = fib.L.evaluate(env)
    Lst = _stack([Lj], (1,), n)
    total = np.zeros((n, n))
    for b in range(n):
        col = _mul_stacked(inv[b], Lst)  # (g^{-1} e_b) * L, shape (n,)
        total += dl[b] * np.einsum("kijk->ij", col[3])
    return float(np.abs(E - total / (8 * f2)).max())


def _unit_stacked(n: int, b: int):
    v = np.zeros(n)
    v[b] = 1.0
    return v, np.zeros((n, n)), np.zeros((n, n, n)), np.zeros((n, n, n, n))


def _mul_stacked(a, s):
    """Product of a vector-valued stacked jet with a scalar one (shape (1,))."""
    a0, a1, a2, a3 = a
    s0, s1, s2, s3 = (t[0] for t in s)
    p0 = a0 * s0
    p1 = a1 * s0 + a0[:, None] * s1
    p2 = (a2 * s0 + a0[:, None, None] * s2 + np.einsum("ia,b->iab", a1, s1)
          + np.einsum("ib,a->iab", a1, s1))
    p3 = (a3 * s0 + a0[:, None, None, None] * s3
          + np.einsum("iab,c->iabc", a2, s1) + np.einsum("iac,b->iabc", a2, s1)
          + np.einsum("ibc,a->iabc", a2, s1)
          + np.einsum("ia,bc->iabc", a1, s2) + np.einsum("ib,ac->iabc", a1, s2)
          + np.einsum("ic,ab->iabc", a1, s2))
    return p0, p1, p2, p3


def structure_predicates(spec: ProductFinslerSpec, n: int = 20, seed: int = 0,
                         tol: float = 1e-8) -> dict:
    """Sampled structure tests; "holds" means no violation on the samples.

    Reported entries:

    * ``riemannian``: Cartan tensor of each factor and of the product.
    * ``berwald``: Berwald tensor of the product, the base, the fibers, and
      the base-direction obstruction ``d g_0^{ks}/dy_0^q * d f_l^2/dx_0^s``.
    * ``weakly_berwald``: mean Berwald tensor of the product and the base, the
      trace obstruction ``d g_0^{ks}/dy_0^k * d f_l^2/dx_0^s`` and the fiber
      balance between ``E_l`` and the twist gradient along the fiber.
    * ``equivalences``: each product-level predicate next to the factor-level
      conditions it should be equivalent to.  The Berwald pairing only
      applies when some twist depends on the base.
    * ``dually_flat`` and ``x_independent``: the defining identities for the
      product, the base and each ``(M_l, f_l F_l)`` at frozen base points,
      plus whether each twist ignores the base.
    """
    pts = sample_points(spec, n, seed)
    sl = spec.slices
    groups: dict[str, dict] = {}

    def group(name, items):
        groups[name] = {k: v().to_dict() for k, v in items.items()}

    trackers = {}

    def t(name):
        if name not in trackers:
            trackers[name] = _track(name, tol)
        return trackers[name][0]

    for x, y in pts:
        x0, y0 = x[sl[0]], y[sl[0]]
        t("cartan.product")(np.abs(cartan_tensor(spec, x, y)).max(), x, y)
        t("cartan.base")(np.abs(cartan_tensor(spec.base, x0, y0)).max(), x, y)
        bw = berwald_tensors(spec, x, y)
        t("berwald.product")(np.abs(bw["B"]).max(), x, y)
        t("mean_berwald.product")(np.abs(bw["E"]).max(), x, y)
        bb = berwald_tensors(spec.base, x0, y0)
        t("berwald.base")(np.abs(bb["B"]).max(), x, y)
        t("mean_berwald.base")(np.abs(bb["E"]).max(), x, y)
        A0 = spec.base.metric.fundamental_stacked(x0, y0)
        m0 = spec.base.dim
        inv0 = np.stack([_solve_stacked(A0, _unit_stacked(m0, b))[1] for b in range(m0)], axis=1)
        # inv0[k, s, q] = d g_0^{ks} / d y_0^q
        t("dually_flat.product")(_dually_flat_residual(spec.product_metric, x, y), x, y)
        t("dually_flat.base")(_dually_flat_residual(spec.base.metric, x0, y0), x, y)
        t("x_independent.product")(_x_gradient(spec.product_metric, x, y), x, y)
        t("x_independent.base")(_x_gradient(spec.base.metric, x0, y0), x, y)
        for l, fib in enumerate(spec.fibers):
            s = sl[l + 1]
            xl, yl = x[s], y[s]
            _, d0, _ = _twist_jets(spec, l, x)
            t(f"cartan.fiber{l + 1}")(np.abs(cartan_tensor(fib, xl, yl)).max(), x, y)
            t(f"berwald.fiber{l + 1}")(np.abs(berwald_tensors(fib, xl, yl)["B"]).max(), x, y)
            t(f"berwald_obstruction.fiber{l + 1}")(
                np.abs(np.einsum("ksq,s->kq", inv0, d0)).max(), x, y)
            t(f"weak_berwald_obstruction.fiber{l + 1}")(
                abs(float(np.einsum("ksk,s->", inv0, d0))), x, y)
            t(f"weak_berwald_balance.fiber{l + 1}")(_weak_berwald_balance(spec, l, x, y), x, y)
            t(f"twist_ignores_base.fiber{l + 1}")(np.abs(d0).max(), x, y)
            rm = _restricted(spec, l, x)
            t(f"dually_flat.fiber{l + 1}")(_dually_flat_residual(rm, xl, yl), x, y)
            t(f"x_independent.fiber{l + 1}")(_x_gradient(rm, xl, yl), x, y)

    done = {k: v[1] for k, v in trackers.items()}
    for prefix in ("cartan", "berwald", "mean_berwald", "berwald_obstruction",
                   "weak_berwald_obstruction", "weak_berwald_balance", "twist_ignores_base",
                   "dually_flat", "x_independent"):
        group(prefix, {k: v for k, v in done.items() if k.split(".")[0] == prefix})

    def h(name):
        return done[name]().holds
    fibers = range(1, len(spec.fibers) + 1)
    factors_riem = h("cartan.base") and all(h(f"cartan.fiber{i}") for i in fibers)
    weak_rhs = (h("mean_berwald.base")
                and all(h(f"weak_berwald_obstruction.fiber{i}") and h(f"weak_berwald_balance.fiber{i}")
                        for i in fibers))
    df_rhs = (h("dually_flat.base")
              and all(h(f"twist_ignores_base.fiber{i}") and h(f"dually_flat.fiber{i}") for i in fibers))
    mk_rhs = (h("x_independent.base")
              and all(h(f"twist_ignores_base.fiber{i}") and h(f"x_independent.fiber{i}") for i in fibers))
    twisted_by_base = not all(h(f"twist_ignores_base.fiber{i}") for i in fibers)
    berwald_rhs = (h("berwald.base")
                   and all(h(f"cartan.fiber{i}") and h(f"berwald_obstruction.fiber{i}") for i in fibers))
    groups["equivalences"] = {
        "berwald": {"product": h("berwald.product"), "conditions": berwald_rhs,
                    "applicable": twisted_by_base,
                    "consistent": (not twisted_by_base) or h("berwald.product") == berwald_rhs},
        "riemannian": {"product": h("cartan.product"), "factors": factors_riem,
                       "consistent": h("cartan.product") == factors_riem},
        "weakly_berwald": {"product": h("mean_berwald.product"), "conditions": weak_rhs,
                           "consistent": h("mean_berwald.product") == weak_rhs},
        "dually_flat": {"product": h("dually_flat.product"), "conditions": df_rhs,
                        "consistent": h("dually_flat.product") == df_rhs},
        "locally_minkowski": {"product": h("x_independent.product"), "conditions": mk_rhs,
                              "consistent": h("x_independent.product") == mk_rhs},
    }
    groups["samples"] = n
    return groups


# ---------------------------------------------------------------------------
# factor library


def riemannian_factor(name: str, xs, ys, metric: Sequence[Sequence[str]]) -> FinslerFactor:
    """``F = sqrt(a_ij(x) y^i y^j)``."""
    terms = []
    for i, yi in enumerate(ys):
        for j, yj in enumerate(ys):
            a = str(metric[i][j]).strip()
            if a not in ("0", "0.0"):
                terms.append(f"({a})*{yi}*{yj}")
    return make_factor(name, xs, ys, f"sqrt({'+'.join(terms) or '0'})")


def quartic_factor(name: str, xs, ys, weights: Sequence[str] | None = None) -> FinslerFactor:
    """``F = (sum_i w_i(x) (y^i)^4)^(1/4)``; a Minkowski norm when weights are constant."""
    w = list(weights) if weights is not None else ["1"] * len(ys)
    body = "+".join(f"({wi})*{yi}^4" for wi, yi in zip(w, ys))
    return make_factor(name, xs, ys, f"({body})^0.25")


def randers_factor(name: str, xs, ys, metric, one_form: Sequence[str]) -> FinslerFactor:
    """``F = sqrt(a(y, y)) + b(y)``; keep ``|b|_a < 1`` on the box for positivity."""
    alpha = riemannian_factor(name, xs, ys, metric).F
    beta = "+".join(f"({b})*{yi}" for b, yi in zip(one_form, ys))
    return make_factor(name, xs, ys, f"{alpha}+({beta})")
