"""Truncated Taylor arithmetic (forward-mode AD up to third order).

A :class:`Jet` carries a value together with its first three derivative
tensors with respect to ``k`` seed variables.  Values may be arrays, in which
case every derivative array has the value shape followed by ``order`` axes of
length ``k``.  All arithmetic broadcasts over the value shape, so one jet
evaluation can cover a whole batch of points.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = ["Jet", "Jet3", "constant", "variable", "compose"]


def _sym3(t: np.ndarray) -> np.ndarray:
    # t[i,j,k] = a_ij b_k  ->  a_ij b_k + a_ik b_j + a_jk b_i
    return t + np.swapaxes(t, -1, -2) + np.moveaxis(t, -1, -3)


def _outer11(a, b):
    return a[..., :, None] * b[..., None, :]


def _outer21(a, b):
    return a[..., :, :, None] * b[..., None, None, :]


def _outer111(a, b, c):
    return a[..., :, None, None] * b[..., None, :, None] * c[..., None, None, :]


class Jet:
    """Value plus gradient, Hessian and third-derivative tensor."""

    __slots__ = ("v", "d1", "d2", "d3", "order", "k")
    __array_priority__ = 1000

    def __init__(self, v, d1=None, d2=None, d3=None, *, order: int = 3, k: int | None = None):
        self.v = np.asarray(v, dtype=float)
        self.order = order
        if k is None:
            if d1 is None:
                raise ValueError("k is required when no gradient is given")
            k = np.shape(d1)[-1]
        self.k = k
        self.d1 = np.zeros((k,)) if d1 is None and order >= 1 else d1
        self.d2 = np.zeros((k, k)) if d2 is None and order >= 2 else d2
        self.d3 = np.zeros((k, k, k)) if d3 is None and order >= 3 else d3

    # -- convenience views -------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.v

    @property
    def gradient(self) -> np.ndarray:
        return np.broadcast_to(self.d1, self.v.shape + (self.k,))

    @property
    def hessian(self) -> np.ndarray:
        return np.broadcast_to(self.d2, self.v.shape + (self.k,) * 2)

    @property
    def third(self) -> np.ndarray:
        return np.broadcast_to(self.d3, self.v.shape + (self.k,) * 3)

    def __repr__(self) -> str:
        return f"Jet(value={self.v!r}, order={self.order}, k={self.k})"

    # -- helpers -------------------------------------------------------------
    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return constant(other, self.k, self.order)

    def _new(self, v, d1, d2, d3, order):
        return Jet(v, d1, d2, d3, order=order, k=self.k)

    # -- arithmetic ------------------------------------------------------------
    def __add__(self, other):
        o = self._lift(other)
        n = min(self.order, o.order)
        return self._new(
            self.v + o.v,
            self.d1 + o.d1 if n >= 1 else None,
            self.d2 + o.d2 if n >= 2 else None,
            self.d3 + o.d3 if n >= 3 else None,
            n,
        )

    __radd__ = __add__

    def __neg__(self):
        n = self.order
        return self._new(
            -self.v,
            -self.d1 if n >= 1 else None,
            -self.d2 if n >= 2 else None,
            -self.d3 if n >= 3 else None,
            n,
        )

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            n = self.order
            return self._new(
                self.v * c,
                self.d1 * c[..., None] if n >= 1 else None,
                self.d2 * c[..., None, None] if n >= 2 else None,
                self.d3 * c[..., None, None, None] if n >= 3 else None,
                n,
            )
        a, b = self, other
        n = min(a.order, b.order)
        av, bv = a.v, b.v
        d1 = d2 = d3 = None
        if n >= 1:
            d1 = a.d1 * bv[..., None] + av[..., None] * b.d1
        if n >= 2:
            cross = _outer11(a.d1, b.d1)
            d2 = (a.d2 * bv[..., None, None] + av[..., None, None] * b.d2
                  + cross + np.swapaxes(cross, -1, -2))
        if n >= 3:
            d3 = (a.d3 * bv[..., None, None, None] + av[..., None, None, None] * b.d3
                  + _sym3(_outer21(a.d2, b.d1)) + _sym3(_outer21(b.d2, a.d1)))
        return self._new(av * bv, d1, d2, d3, n)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        return self.power(float(p))

    # -- univariate functions ------------------------------------------------
    def apply(self, p0, p1, p2, p3) -> "Jet":
        """Chain rule with the outer function's derivatives at the value."""
        n = self.order
        f1, f2, f3 = self.d1, self.d2, self.d3
        d1 = d2 = d3 = None
        if n >= 1:
            d1 = p1[..., None] * f1
        if n >= 2:
            d2 = p2[..., None, None] * _outer11(f1, f1) + p1[..., None, None] * f2
        if n >= 3:
            d3 = (p3[..., None, None, None] * _outer111(f1, f1, f1)
                  + p2[..., None, None, None] * _sym3(_outer21(f2, f1))
                  + p1[..., None, None, None] * f3)
        return self._new(p0, d1, d2, d3, n)

    def exp(self):
        e = np.exp(self.v)
        return self.apply(e, e, e, e)

    def log(self):
        u = self.v
        if np.any(u <= 0):
            raise DomainError("log of a non-positive value")
        r = 1.0 / u
        return self.apply(np.log(u), r, -r * r, 2 * r ** 3)

    def sin(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self.apply(s, c, -s, -c)

    def cos(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self.apply(c, -s, -c, s)

    def sqrt(self):
        u = self.v
        if np.any(u < 0) or (self.order > 0 and np.any(u == 0)):
            raise DomainError("sqrt of a negative value (or derivative at 0)")
        r = np.sqrt(u)
        return self.apply(r, 0.5 / r, -0.25 / (r * u), 0.375 / (r * u * u))

    def reciprocal(self):
        return self.power(-1.0)

    def power(self, p: float) -> "Jet":
        u = self.v
        is_int = float(p).is_integer()
        if not is_int and np.any(u <= 0):
            raise DomainError(f"non-integer power {p} of a non-positive value")
        if p < 0 and np.any(u == 0):
            raise DomainError("negative power of zero")
        coeffs = []
        c = 1.0
        for m in range(4):
            if is_int and p >= 0 and m > p:
                coeffs.append(np.zeros_like(u))
            else:
                coeffs.append(c * u ** (p - m))
            c *= p - m
        return self.apply(*coeffs)


Jet3 = Jet


def constant(c, k: int, order: int = 3) -> Jet:
    return Jet(np.asarray(c, dtype=float), order=order, k=k)


def variable(x, index: int, k: int, order: int = 3) -> Jet:
    d1 = np.zeros(k)
    d1[index] = 1.0
    return Jet(np.asarray(x, dtype=float), d1 if order >= 1 else None, order=order, k=k)


def compose(f: Jet, p0, p1, p2, p3) -> Jet:
    return f.apply(np.asarray(p0, float), np.asarray(p1, float),
                   np.asarray(p2, float), np.asarray(p3, float))
