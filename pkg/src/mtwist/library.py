"""Seeded generators of test geometries."""
from __future__ import annotations

import numpy as np

from .chart import ProductSpec, assemble_metric, make_spec
from .geodesics import VariationField
from .finsler import (ProductFinslerSpec, make_product, quartic_factor, randers_factor,
                      riemannian_factor)

__all__ = ["random_warp", "random_spec", "random_points", "static_spacetime",
           "static_library", "random_finsler_product", "sinusoidal_fields",
           "unit_timelike"]

WARP_KINDS = ("exp", "affine", "exp_quadratic")


def _r(x: float) -> str:
    s = repr(round(float(x), 6))
    return f"({s})" if s.startswith("-") else s


def random_warp(rng: np.random.Generator, base: list[str], fiber: list[str], kind: str | None = None) -> str:
    """One of ``e^{a t}``, ``A t + B`` or ``e^{a t + b x^2}`` in the first base/fiber coordinate."""
    kind = kind or WARP_KINDS[rng.integers(len(WARP_KINDS))]
    t = base[0]
    if kind == "exp":
        return f"exp({_r(rng.uniform(-0.8, 0.8))}*{t})"
    if kind == "affine":
        return f"{_r(rng.uniform(0.2, 0.8))}*{t} + {_r(rng.uniform(1.5, 2.5))}"
    if kind == "exp_quadratic":
        return f"exp({_r(rng.uniform(-0.8, 0.8))}*{t} + {_r(rng.uniform(-0.5, 0.5))}*{fiber[0]}^2)"
    raise ValueError(f"unknown warp kind {kind!r}")


def _base_metric(rng, coords, lorentzian: bool):
    n = len(coords)
    if n == 1:
        return [["-1" if lorentzian else "1"]]
    second = f"1 + {_r(rng.uniform(0.0, 0.4))}*{coords[0]}^2"
    return [["-1" if lorentzian else "1", "0"], ["0", second]]


def _fiber_metric(rng, coords):
    l = len(coords)
    if l == 1:
        return [["1"]]
    return [["1", "0"], ["0", f"1 + {_r(rng.uniform(0.0, 0.5))}*{coords[0]}^2"]]


def random_spec(seed: int, torsion: str = "none", lorentzian: bool | None = None,
                max_base: int = 2, max_fibers: int = 2, max_fiber_dim: int = 2) -> ProductSpec:
    """Random product with base dimension, fiber count and fiber dimensions up to the limits.

    ``torsion`` is ``none``, ``base`` or ``fiber`` (a torsion vector on the
    first fiber).
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_base + 1))
    m = int(rng.integers(1, max_fibers + 1))
    lor = bool(rng.integers(2)) if lorentzian is None else lorentzian
    bcoords = ["t", "s"][:n]
    fibers, warps = [], []
    for i in range(m):
        l = int(rng.integers(1, max_fiber_dim + 1))
        fc = [f"x{i}{j}" for j in range(l)]
        fibers.append((f"F{i + 1}", l, fc, _fiber_metric(rng, fc)))
        warps.append(random_warp(rng, bcoords, fc))
    kw: dict = {}
    if torsion == "base":
        comps = [f"1 + {_r(rng.uniform(-0.3, 0.3))}*{bcoords[0]}"]
        if n == 2:
            comps.append(f"{_r(rng.uniform(-0.5, 0.5))}*{bcoords[1]}")
        kw = dict(torsion_location="base", torsion_components=comps)
    elif torsion == "fiber":
        fc = fibers[0][2]
        comps = [f"{_r(rng.uniform(0.5, 1.0))} + {_r(rng.uniform(-0.3, 0.3))}*{fc[-1]}"]
        comps += [f"{_r(rng.uniform(-0.5, 0.5))}*{fc[0]}" for _ in fc[1:]]
        kw = dict(torsion_location="fiber", torsion_components=comps, torsion_fiber=0)
    elif torsion != "none":
        raise ValueError(f"unknown torsion placement {torsion!r}")
    dim = n + sum(f[1] for f in fibers)
    box = [[-0.5, 0.5]] * dim
    return make_spec(_base_metric(rng, bcoords, lor), bcoords, fibers, warps, domain_box=box, **kw)


def random_points(spec: ProductSpec, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    box = spec.domain_box
    return rng.uniform(box[:, 0], box[:, 1], size=(n, spec.dim))


def static_spacetime(f1: str, f2: str, fiber_metric=None, box=None) -> ProductSpec:
    """``-du^2 + f1(u, x)^2 dx^2 + f2(u)^2 g_F`` with a two-dimensional fiber."""
    fm = fiber_metric or [["1", "0"], ["0", "1 + 0.3*y^2"]]
    return make_spec([["-1"]], ["u"], [("X", 1, ["x"], [["1"]]), ("F", 2, ["y", "z"], fm)],
                     [f1, f2], domain_box=box or [[-0.5, 1.5], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]])


def static_library() -> list[ProductSpec]:
    return [
        static_spacetime("exp(0.3*u + 0.2*x^2)", "2 + u^2"),
        static_spacetime("1 + 0.2*u^2 + 0.1*x", "exp(0.4*u)"),
        static_spacetime("exp(-0.2*u*x)", "1.5 + 0.3*u"),
    ]


def sinusoidal_fields(spec: ProductSpec, curve, count: int = 5, seed: int = 0):
    """Variation fields ``sum_k a_k sin(k pi s)`` in random directions, vanishing at the ends.

    They are projected perpendicular to the curve's tangent pointwise.
    """
    rng = np.random.default_rng(seed)
    t0, t1 = curve.span
    L = t1 - t0
    out = []
    for _ in range(count):
        modes = [(int(k), rng.normal(size=spec.dim) * 0.3) for k in (1, 2)]

        def raw(s, modes=modes):
            s = np.asarray(s, float)
            u = (s - t0) / L
            return sum(np.sin(k * np.pi * u)[..., None] * a for k, a in modes)

        s = curve.t
        x, v, w = curve.points, curve.velocity, raw(s)
        g = np.array([assemble_metric(spec, xi) for xi in x])
        gv = np.einsum("...ab,...b->...a", g, v)
        coef = np.einsum("...a,...a->...", gv, w) / np.einsum("...a,...a->...", gv, v)
        out.append(VariationField(s, w - coef[..., None] * v, vanishes_at_ends=True))
    return out


def unit_timelike(spec: ProductSpec, p, v) -> np.ndarray:
    """Rescale ``v`` so that ``g(v, v) = -1`` at ``p``."""
    v = np.asarray(v, float)
    q = float(v @ assemble_metric(spec, np.asarray(p, float)) @ v)
    if q >= 0:
        raise ValueError(f"velocity is not timelike: g(v, v) = {q!r}")
    return v / np.sqrt(-q)


def random_finsler_product(seed: int, non_riemannian: bool = True) -> ProductFinslerSpec:
    """Base of dimension 1 or 2 and one or two fibers; optionally a Randers or quartic factor."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    m = int(rng.integers(1, 3))
    bx = ["s", "r"][:n]
    by = ["ys", "yr"][:n]
    special = int(rng.integers(0, m + 1)) if non_riemannian else -1

    def factor(idx, name, xs, ys):
        a = _r(rng.uniform(0.0, 0.4))
        metric = [["1" if i == j else "0" for j in range(len(xs))] for i in range(len(xs))]
        metric[0][0] = f"1 + {a}*{xs[0]}^2"
        if idx != special:
            return riemannian_factor(name, xs, ys, metric)
        if rng.integers(2) and len(xs) > 1:
            return quartic_factor(name, xs, ys, [f"1 + {a}*{xs[-1]}^2"] + ["1"] * (len(xs) - 1))
        form = [f"{_r(rng.uniform(-0.2, 0.2))}*{xs[0]} + {_r(rng.uniform(-0.2, 0.2))}" for _ in xs]
        return randers_factor(name, xs, ys, metric, form)

    base = factor(0, "M0", bx, by)
    fibers, twists = [], []
    for i in range(m):
        l = int(rng.integers(1, 3))
        xs = [f"a{i}{j}" for j in range(l)]
        ys = [f"v{i}{j}" for j in range(l)]
        fibers.append(factor(i + 1, f"M{i + 1}", xs, ys))
        twists.append(f"exp({_r(rng.uniform(-0.4, 0.4))}*{bx[0]} + {_r(rng.uniform(-0.3, 0.3))}*{xs[0]}^2)")
    return make_product(base, fibers, twists)
