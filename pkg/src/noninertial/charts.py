"""Rindler and instantaneous-inertial coordinates in 1+1 dimensions.

Primed coordinates ``(t', x')`` belong to an observer with proper
acceleration ``g``; ``(T, X)`` is the inertial frame momentarily at rest with
the observer at ``t' = t_bar``.  Only the right wedge ``1 + g x'/c^2 > 0`` is
supported.  Transverse coordinates are untouched and therefore omitted.

The closed forms are rearranged so that ``g -> 0`` is smooth and exact at
``g = 0`` (no ``c^2/g`` cancellations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class WedgeError(ValueError):
    pass


@dataclass(frozen=True)
class ChartParams:
    g: float
    c: float
    t_bar: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")


def _check_wedge(xp, p: ChartParams):
    lapse = 1.0 + p.g * np.asarray(xp, dtype=float) / p.c**2
    if np.any(lapse <= 0):
        raise WedgeError("point lies beyond the Rindler horizon: 1 + g x'/c^2 must be > 0")
    return lapse


def rindler_to_inertial(tp, xp, p: ChartParams):
    """Map ``(t', x')`` to ``(T, X)``."""
    tp = np.asarray(tp, dtype=float)
    xp = np.asarray(xp, dtype=float)
    lapse = _check_wedge(xp, p)
    dt = tp - p.t_bar
    if p.g == 0:
        return dt + 0.0 * xp, xp + 0.0 * dt
    phi = p.g * dt / p.c
    # X = (x' + c^2/g) cosh(phi) - c^2/g without the large cancellation
    X = xp * np.cosh(phi) + (p.c**2 / p.g) * 2.0 * np.sinh(phi / 2) ** 2
    T = lapse * (p.c / p.g) * np.sinh(phi)
    return T, X


def inertial_to_rindler(T, X, p: ChartParams):
    """Inverse of :func:`rindler_to_inertial`."""
    T = np.asarray(T, dtype=float)
    X = np.asarray(X, dtype=float)
    u = p.g * X / p.c**2
    w = p.g * T / p.c
    if np.any(1.0 + u <= np.abs(w)):
        raise WedgeError("outside Rindler wedge: need |cT| < X + c^2/g")
    if p.g == 0:
        return T + p.t_bar + 0.0 * X, X + 0.0 * T
    tp = (p.c / p.g) * np.arctanh(w / (1.0 + u)) + p.t_bar
    root = np.sqrt((1.0 + u) ** 2 - w**2)
    xp = (X * (u + 2.0) - p.c * T * w) / (root + 1.0)
    return tp, xp


def killing_time_component(X, p: ChartParams):
    """Factor ``1 + g X/c^2`` relating ``d/dt'`` to ``d/dT`` on the slice."""
    return 1.0 + p.g * np.asarray(X, dtype=float) / p.c**2


def jacobian_at_slice(xp, p: ChartParams) -> np.ndarray:
    """``d(T, X)/d(t', x')`` at ``t' = t_bar``: ``diag(1 + g x'/c^2, 1)``."""
    lapse = float(_check_wedge(xp, p))
    return np.array([[lapse, 0.0], [0.0, 1.0]])


def jacobian_fd(tp, xp, p: ChartParams, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian ``d(T, X)/d(t', x')``."""
    out = np.empty((2, 2))
    for j, (dt, dx) in enumerate(((h, 0.0), (0.0, h))):
        hi = rindler_to_inertial(tp + dt, xp + dx, p)
        lo = rindler_to_inertial(tp - dt, xp - dx, p)
        out[:, j] = [(hi[0] - lo[0]) / (2 * h), (hi[1] - lo[1]) / (2 * h)]
    return out


def jacobian_exact(tp, xp, p: ChartParams) -> np.ndarray:
    lapse = float(_check_wedge(xp, p))
    phi = p.g * (tp - p.t_bar) / p.c
    ch, sh = np.cosh(phi), np.sinh(phi)
    return np.array([[lapse * ch, sh / p.c], [p.c * lapse * sh, ch]])


def pulled_back_metric(J: np.ndarray, c: float) -> np.ndarray:
    """Flat metric ``diag(-c^2, 1)`` pulled back by ``J``, returned in ``(ct', x')`` form."""
    eta = np.diag([-(c**2), 1.0])
    g = J.T @ eta @ J
    scale = np.diag([1.0 / c, 1.0])
    return scale @ g @ scale


def rindler_metric(xp, p: ChartParams) -> np.ndarray:
    lapse = float(killing_time_component(xp, p))
    return np.diag([-(lapse**2), 1.0])


def metric_pullback_check(tp_grid, xp_grid, p: ChartParams, h: float = 3e-5) -> float:
    """Max deviation between the finite-difference pullback and the Rindler metric."""
    worst = 0.0
    for tp in np.ravel(tp_grid):
        for xp in np.ravel(xp_grid):
            G = pulled_back_metric(jacobian_fd(tp, xp, p, h), p.c)
            worst = max(worst, float(np.max(np.abs(G - rindler_metric(xp, p)))))
    return worst
