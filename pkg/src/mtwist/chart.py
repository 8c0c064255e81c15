"""Product charts: base, fibers, warping functions, torsion vector.

A :class:`ProductSpec` describes ``B x_{b_1} F_1 x ... x_{b_m} F_m`` in one
global chart.  Coordinates are ordered base first, then each fiber in turn.
Fiber indices are 0-based throughout the Python API and the JSON format.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, DomainError, MtwistError, NonDegenerateViolation, SpecError
from .expr import ZERO, Expr, Num, Pow, as_expr, parse_expr

__all__ = [
    "BaseSpec", "FiberSpec", "WarpFn", "TorsionVectorSpec", "ProductSpec",
    "BlockVector", "Finding", "ValidationReport",
    "assemble_metric", "validate_spec", "block_split", "load_spec", "make_spec",
    "TOL_FLAT",
]

TOL_FLAT = 1e-9


def _matrix(rows, scope) -> tuple[tuple[Expr, ...], ...]:
    return tuple(tuple(_bind(e, scope) for e in row) for row in rows)


def _bind(e, scope) -> Expr:
    if isinstance(e, Expr):
        extra = e.free_vars() - set(scope)
        if extra:
            raise SpecError(f"expression {e} uses out-of-scope variables {sorted(extra)}")
        return e
    if isinstance(e, (int, float)):
        return Num(float(e))
    return parse_expr(str(e), scope)


@dataclass(frozen=True, eq=False)
class BaseSpec:
    dim: int
    coords: tuple[str, ...]
    metric: tuple[tuple[Expr, ...], ...]
    signature: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class FiberSpec:
    name: str
    dim: int
    coords: tuple[str, ...]
    metric: tuple[tuple[Expr, ...], ...]


@dataclass(frozen=True, eq=False)
class WarpFn:
    fiber_index: int
    expr: Expr


@dataclass(frozen=True, eq=False)
class TorsionVectorSpec:
    """Location is ``"none"``, ``"base"`` or ``"fiber"`` (with ``fiber_index``)."""

    location: str = "none"
    components: tuple[Expr, ...] = ()
    fiber_index: int | None = None


@dataclass(frozen=True, eq=False)
class ProductSpec:
    base: BaseSpec
    fibers: tuple[FiberSpec, ...]
    warps: tuple[WarpFn, ...]
    torsion: TorsionVectorSpec
    domain_box: np.ndarray
    fields: Mapping[str, tuple[Expr, ...]] = field(default_factory=dict)

    # -- layout ---------------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.base.dim + sum(f.dim for f in self.fibers)

    @property
    def coords(self) -> tuple[str, ...]:
        out = list(self.base.coords)
        for f in self.fibers:
            out.extend(f.coords)
        return tuple(out)

    @property
    def fiber_dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.fibers)

    def block_slices(self) -> list[slice]:
        """Slices of the global coordinate vector: base first, then fibers."""
        out = [slice(0, self.base.dim)]
        start = self.base.dim
        for f in self.fibers:
            out.append(slice(start, start + f.dim))
            start += f.dim
        return out

    def fiber_slice(self, i: int) -> slice:
        return self.block_slices()[i + 1]

    @property
    def base_slice(self) -> slice:
        return slice(0, self.base.dim)

    def env(self, p) -> dict[str, np.ndarray]:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.dim:
            raise DimensionError(f"point has {p.shape[-1]} coordinates, expected {self.dim}")
        return {name: p[..., i] for i, name in enumerate(self.coords)}

    def warp(self, i: int) -> Expr:
        return self.warps[i].expr

    # -- global expressions ----------------------------------------------------
    def metric_expressions(self) -> list[list[Expr]]:
        """Full metric as a matrix of expressions (zeros off the blocks)."""
        n = self.dim
        g = [[ZERO] * n for _ in range(n)]
        sl = self.block_slices()
        for a in range(self.base.dim):
            for b in range(self.base.dim):
                g[a][b] = self.base.metric[a][b]
        for i, f in enumerate(self.fibers):
            w2 = Pow(self.warp(i), 2.0)
            s = sl[i + 1].start
            for a in range(f.dim):
                for b in range(f.dim):
                    entry = f.metric[a][b]
                    if entry != ZERO:
                        g[s + a][s + b] = w2 * entry
        return g

    def torsion_expressions(self) -> list[Expr] | None:
        t = self.torsion
        if t.location == "none":
            return None
        out = [ZERO] * self.dim
        sl = self.base_slice if t.location == "base" else self.fiber_slice(t.fiber_index)
        for a, c in zip(range(sl.start, sl.stop), t.components):
            out[a] = c
        return out

    def torsion_block(self) -> int | None:
        """-1 for base, fiber index for a fiber, None without torsion."""
        t = self.torsion
        if t.location == "none":
            return None
        return -1 if t.location == "base" else t.fiber_index

    def box_center(self) -> np.ndarray:
        return self.domain_box.mean(axis=1)

    # -- serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "base": {
                "dim": self.base.dim,
                "coords": list(self.base.coords),
                "metric": [[str(e) for e in row] for row in self.base.metric],
                "signature": list(self.base.signature),
            },
            "fibers": [
                {"name": f.name, "dim": f.dim, "coords": list(f.coords),
                 "metric": [[str(e) for e in row] for row in f.metric]}
                for f in self.fibers
            ],
            "warps": [str(w.expr) for w in self.warps],
            "torsion": {"location": self.torsion.location,
                        "components": [str(c) for c in self.torsion.components]},
            "domain_box": self.domain_box.tolist(),
        }
        if self.torsion.location == "fiber":
            d["torsion"]["fiber_index"] = self.torsion.fiber_index
        if self.fields:
            d["fields"] = [{"name": k, "components": [str(c) for c in v]}
                           for k, v in self.fields.items()]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProductSpec":
        try:
            return _spec_from_dict(d)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed spec: {exc}") from exc


def _default_coords(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(dim)]


def _spec_from_dict(d: Mapping) -> ProductSpec:
    b = d["base"]
    bdim = int(b["dim"])
    bcoords = tuple(b.get("coords") or _default_coords("u", bdim))
    fibers_in = d.get("fibers", [])
    fibers = []
    for idx, f in enumerate(fibers_in):
        fdim = int(f["dim"])
        name = f.get("name", f"F{idx + 1}")
        coords = tuple(f.get("coords") or _default_coords(f"{name}_", fdim))
        fibers.append((name, fdim, coords, f["metric"]))
    warps = d.get("warps", [])
    torsion = d.get("torsion") or {"location": "none"}
    return make_spec(
        base_metric=b["metric"], base_coords=bcoords, signature=b.get("signature"),
        fibers=fibers, warps=warps,
        torsion_location=torsion.get("location", "none"),
        torsion_components=torsion.get("components", ()),
        torsion_fiber=torsion.get("fiber_index"),
        domain_box=d.get("domain_box"),
        fields={f["name"]: f["components"] for f in d.get("fields", [])},
    )


def make_spec(base_metric, base_coords, fibers=(), warps=(), *, signature=None,
              torsion_location="none", torsion_components=(), torsion_fiber=None,
              domain_box=None, fields=None) -> ProductSpec:
    """Build and bind a :class:`ProductSpec`.

    ``fibers`` is a sequence of ``(name, dim, coords, metric)`` tuples.
    Expressions may be strings; each is parsed with only the variables it is
    allowed to see (fiber metrics: own fiber coordinates, warps: base plus own
    fiber, torsion components: the carrying factor).
    """
    bcoords = tuple(base_coords)
    bdim = len(bcoords)
    bmetric = _matrix(base_metric, bcoords)
    if len(bmetric) != bdim or any(len(r) != bdim for r in bmetric):
        raise SpecError("base metric shape does not match base dimension")
    fspecs = []
    for name, fdim, coords, metric in fibers:
        coords = tuple(coords)
        if len(coords) != fdim:
            raise SpecError(f"fiber {name} declares dim {fdim} but {len(coords)} coordinates")
        m = _matrix(metric, coords)
        if len(m) != fdim or any(len(r) != fdim for r in m):
            raise SpecError(f"fiber {name} metric shape does not match its dimension")
        fspecs.append(FiberSpec(name, fdim, coords, m))
    allc = list(bcoords) + [c for f in fspecs for c in f.coords]
    if len(set(allc)) != len(allc):
        raise SpecError("coordinate names must be unique across factors")
    if len(warps) != len(fspecs):
        raise SpecError(f"{len(fspecs)} fibers but {len(warps)} warping functions")
    wspecs = tuple(WarpFn(i, _bind(w, bcoords + fspecs[i].coords)) for i, w in enumerate(warps))

    loc = str(torsion_location)
    if loc.startswith("fiber"):
        if torsion_fiber is None and "(" in loc:
            torsion_fiber = int(loc[loc.index("(") + 1:loc.index(")")])
        loc = "fiber"
    if loc == "none":
        tors = TorsionVectorSpec()
    elif loc == "base":
        comps = tuple(_bind(c, bcoords) for c in torsion_components)
        if len(comps) != bdim:
            raise SpecError("torsion components must match base dimension")
        tors = TorsionVectorSpec("base", comps)
    elif loc == "fiber":
        r = int(torsion_fiber)
        fc = fspecs[r].coords
        comps = tuple(_bind(c, fc) for c in torsion_components)
        if len(comps) != fspecs[r].dim:
            raise SpecError("torsion components must match the carrying fiber dimension")
        tors = TorsionVectorSpec("fiber", comps, r)
    else:
        raise SpecError(f"unknown torsion location {torsion_location!r}")

    n = len(allc)
    box = np.array(domain_box if domain_box is not None else [[-1.0, 1.0]] * n, dtype=float)
    if box.shape != (n, 2) or np.any(box[:, 0] > box[:, 1]):
        raise SpecError("domain_box must be a list of [lo, hi] per coordinate")

    flds = {}
    for name, comps in (fields or {}).items():
        comps = tuple(_bind(c, allc) for c in comps)
        if len(comps) != n:
            raise SpecError(f"field {name} must have {n} components")
        flds[name] = comps

    if signature is None:
        center = {c: (box[i, 0] + box[i, 1]) / 2 for i, c in enumerate(bcoords)}
        gb = np.array([[float(np.asarray(e.evaluate(center))) for e in row] for row in bmetric])
        signature = tuple(int(s) for s in np.sign(np.linalg.eigvalsh(gb)))
    sig = tuple(int(s) for s in signature)
    if len(sig) != bdim:
        raise SpecError("signature length must equal base dimension")
    return ProductSpec(BaseSpec(bdim, bcoords, bmetric, sig), tuple(fspecs), wspecs, tors, box, flds)


def load_spec(path: str | Path) -> ProductSpec:
    with open(path) as fh:
        return ProductSpec.from_dict(json.load(fh))


# ---------------------------------------------------------------------------


def _eval_block(matrix, env) -> np.ndarray:
    return np.array([[float(np.asarray(e.evaluate(env))) for e in row] for row in matrix])


def assemble_metric(spec: ProductSpec, p) -> np.ndarray:
    """Block-diagonal metric at ``p``; raises NonDegenerateViolation naming the block."""
    env = spec.env(p)
    n = spec.dim
    g = np.zeros((n, n))
    sl = spec.block_slices()
    gb = _eval_block(spec.base.metric, env)
    _check_block(gb, "B")
    g[sl[0], sl[0]] = gb
    for i, f in enumerate(spec.fibers):
        gf = _eval_block(f.metric, env)
        _check_block(gf, f"F{i + 1}")
        b = float(np.asarray(spec.warp(i).evaluate(env)))
        if b <= 0:
            raise NonDegenerateViolation(f"F{i + 1}", f"(warping function {b!r} is not positive)")
        g[sl[i + 1], sl[i + 1]] = b * b * gf
    return g


def _check_block(m: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(m)):
        raise NonDegenerateViolation(name, "(non-finite entries)")
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= 1e-12 * max(1.0, s[0]):
        raise NonDegenerateViolation(name, f"(smallest singular value {s[-1]:.3g})")


@dataclass
class Finding:
    kind: str  # positivity | symmetry | invertibility | signature | domain
    block: str
    point: list[float]
    detail: str


@dataclass
class ValidationReport:
    findings: list[Finding]
    classification: list[str]  # "warped" or "twisted" per fiber
    max_fiber_derivative: list[float]

    @property
    def ok(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "classification": list(self.classification),
            "max_fiber_derivative": list(self.max_fiber_derivative),
            "findings": [f.__dict__ for f in self.findings],
        }


def sample_grid(box: np.ndarray, per_axis: int = 5) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) if hi > lo else np.array([lo]) for lo, hi in box]
    return np.array(list(itertools.product(*axes)), dtype=float)


def validate_spec(spec: ProductSpec, per_axis: int = 5, tol_flat: float = TOL_FLAT) -> ValidationReport:
    """Sample the domain box and report problems instead of raising."""
    pts = sample_grid(spec.domain_box, per_axis)
    env = spec.env(pts)
    findings: list[Finding] = []
    blocks = [("B", spec.base.metric)] + [(f"F{i + 1}", f.metric) for i, f in enumerate(spec.fibers)]
    for name, mat in blocks:
        try:
            vals = np.stack([np.stack([np.broadcast_to(np.asarray(e.evaluate(env), float), (len(pts),))
                                       for e in row], -1) for row in mat], -2)
        except (DomainError, MtwistError) as exc:
            findings.append(Finding("domain", name, [], str(exc)))
            continue
        asym = np.abs(vals - np.swapaxes(vals, -1, -2)).max(axis=(-1, -2))
        for j in np.nonzero(asym > 1e-12)[0][:1]:
            findings.append(Finding("symmetry", name, pts[j].tolist(), f"asymmetry {asym[j]:.3g}"))
        sym = 0.5 * (vals + np.swapaxes(vals, -1, -2))
        eig = np.linalg.eigvalsh(sym)
        scale = np.maximum(1.0, np.abs(eig).max(axis=-1))
        singular = np.abs(eig).min(axis=-1) <= 1e-12 * scale
        for j in np.nonzero(singular)[0][:1]:
            findings.append(Finding("invertibility", name, pts[j].tolist(), "singular block"))
        if name == "B":
            want = sorted(spec.base.signature)
            got = np.sort(np.sign(eig), axis=-1)
            bad = np.any(got != np.array(want), axis=-1) & ~singular
            for j in np.nonzero(bad)[0][:1]:
                findings.append(Finding("signature", name, pts[j].tolist(),
                                        f"eigenvalue signs {got[j].astype(int).tolist()} vs {want}"))
    classification, maxder = [], []
    for i, f in enumerate(spec.fibers):
        w = spec.warp(i)
        try:
            jet = w.jet(env, f.coords, order=1)
        except (DomainError, MtwistError) as exc:
            findings.append(Finding("domain", f"F{i + 1}", [], str(exc)))
            classification.append("unknown")
            maxder.append(float("nan"))
            continue
        vals = np.broadcast_to(jet.v, (len(pts),))
        for j in np.nonzero(vals <= 0)[0][:1]:
            findings.append(Finding("positivity", f"F{i + 1}", pts[j].tolist(),
                                    f"warping function value {vals[j]!r}"))
        d = float(np.abs(jet.gradient).max()) if f.dim else 0.0
        maxder.append(d)
        classification.append("twisted" if d > tol_flat else "warped")
    return ValidationReport(findings, classification, maxder)


# ---------------------------------------------------------------------------


@dataclass
class BlockVector:
    """A tangent vector split into base and fiber views (views share memory)."""

    data: np.ndarray
    slices: tuple[slice, ...]

    @property
    def base(self) -> np.ndarray:
        return self.data[self.slices[0]]

    @property
    def fibers(self) -> list[np.ndarray]:
        return [self.data[s] for s in self.slices[1:]]

    def block(self, i: int) -> np.ndarray:
        """Block ``i`` with -1 meaning the base."""
        return self.data[self.slices[i + 1]]

    def assemble(self) -> np.ndarray:
        return self.data.copy()

    def support(self, tol: float = 0.0) -> list[int]:
        """Blocks with a nonzero component (-1 = base)."""
        return [i - 1 for i, s in enumerate(self.slices) if np.any(np.abs(self.data[s]) > tol)]


def block_split(spec: ProductSpec, v: Sequence[float]) -> BlockVector:
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.dim,):
        raise DimensionError(f"vector has shape {v.shape}, expected ({spec.dim},)")
    return BlockVector(v, tuple(spec.block_slices()))


def block_vector(spec: ProductSpec, block: int, comps: Sequence[float]) -> np.ndarray:
    """Global vector supported on one block (-1 = base)."""
    out = np.zeros(spec.dim)
    out[spec.block_slices()[block + 1]] = comps
    return out
