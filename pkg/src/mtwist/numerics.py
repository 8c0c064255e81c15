"""Fixed-step RK4 integration and composite Simpson quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationBlowup, QuadratureError

__all__ = ["Trajectory", "integrate_ode", "quad", "observed_order"]


@dataclass
class Trajectory:
    t: np.ndarray  # (N,)
    y: np.ndarray  # (N, ...) state samples
    dy: np.ndarray  # (N, ...) right-hand side at the samples

    def __call__(self, s):
        """Cubic Hermite interpolation between step points."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self.t, s, side="right") - 1, 0, len(self.t) - 2)
        t0, t1 = self.t[idx], self.t[idx + 1]
        h = t1 - t0
        u = ((s - t0) / h)
        shape = (-1,) + (1,) * (self.y.ndim - 1)
        u = u.reshape(shape) if u.ndim else u
        h = h.reshape(shape) if np.ndim(h) else h
        y0, y1 = self.y[idx], self.y[idx + 1]
        f0, f1 = self.dy[idx], self.dy[idx + 1]
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate_ode(rhs: Callable[[float, np.ndarray], np.ndarray], y0, t_span, step: float) -> Trajectory:
    """Classical RK4 with a fixed step adjusted to land exactly on ``t_span[1]``."""
    t0, t1 = map(float, t_span)
    if step <= 0:
        raise ValueError("step must be positive")
    n = max(1, int(np.ceil(abs(t1 - t0) / step - 1e-9)))
    h = (t1 - t0) / n
    y = np.array(y0, dtype=float)
    ts = t0 + h * np.arange(n + 1)
    ts[-1] = t1
    ys = np.empty((n + 1,) + y.shape)
    dys = np.empty_like(ys)
    ys[0] = y
    t = t0
    k1 = np.asarray(rhs(t, y), dtype=float)
    dys[0] = k1
    for i in range(n):
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t_new = ts[i + 1]
        if not np.all(np.isfinite(y_new)):
            raise IntegrationBlowup(t)
        k1 = np.asarray(rhs(t_new, y_new), dtype=float)
        if not np.all(np.isfinite(k1)):
            raise IntegrationBlowup(t_new, "non-finite derivative")
        y, t = y_new, t_new
        ys[i + 1] = y
        dys[i + 1] = k1
    return Trajectory(ts, ys, dys)


def quad(f: Callable, a: float, b: float, n: int) -> float:
    """Composite Simpson rule with ``n`` (even) subintervals.

    ``f`` may be vectorised; scalar callables are mapped over the nodes.
    """
    if n <= 0 or n % 2:
        raise ValueError("n must be a positive even integer")
    x = np.linspace(a, b, n + 1)
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            raise ValueError
    except (ValueError, TypeError):
        y = np.array([float(f(xi)) for xi in x])
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise QuadratureError(f"integrand not finite at {bad!r}")
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return float((b - a) / (3 * n) * np.dot(w, y))


def observed_order(errors_by_step: dict[float, float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    h = np.log(np.array(sorted(errors_by_step)))
    e = np.log(np.array([errors_by_step[k] for k in sorted(errors_by_step)]))
    return float(np.polyfit(h, e, 1)[0])
