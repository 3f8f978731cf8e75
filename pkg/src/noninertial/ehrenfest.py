"""Ehrenfest acceleration of the c.m. position.

The symbolic side is the double commutator ``-(1/hbar^2)[[X, H], H]``; the
numeric side is the central second difference of a recorded ``<X>(t)``.
The tuned classical support re-fits its first-order coefficient to the
current expectation values at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .opalg import OperatorSeries, commutator, multiply


def symbolic_acceleration(H: OperatorSeries, order: int | None = None) -> OperatorSeries:
    """``-(1/hbar^2) [[X, H], H]`` truncated at ``eps**order`` (default: ``H``'s order or 1)."""
    t = H.table
    if order is None:
        order = H.order if H.order is not None else 1
    X = t.op("X", None)
    Hk = H.with_order(order)
    inner = commutator(X.with_order(order), Hk)
    return multiply(t.scalar("hbar", -2, None) * -1, commutator(inner, Hk)).with_order(order)


def numeric_acceleration(x, dt: float) -> np.ndarray:
    """Central second differences; the result is two samples shorter than ``x``."""
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise ValueError("need at least three samples for a second difference")
    return (x[2:] - 2 * x[1:-1] + x[:-2]) / (dt * dt)


def tuned_classical_support(moments: dict, M: float, g: float, dims: int = 1) -> float:
    """Coefficient ``u1`` of the first-order classical potential ``U1 = u1 X``.

    ``u1 = -(<Hrel0> + (<P^2> - 2<P_x^2>)/2M) g``; for motion along x only
    (``dims = 1``) ``P^2 = P_x^2``.  ``moments`` holds lab-frame ensemble means
    ``Hrel0`` and ``P2`` (that is ``<P_x^2>``); with ``dims = 3`` a key
    ``Psq`` for the full ``<P^2>`` is required.
    """
    px2 = moments["P2"]
    p2 = px2 if dims == 1 else moments["Psq"]
    return -(moments["Hrel0"] + (p2 - 2 * px2) / (2 * M)) * g


@dataclass
class EhrenfestReport:
    tag: str
    times: np.ndarray
    predicted: np.ndarray
    numeric: np.ndarray
    residual: np.ndarray
    tol: float
    allowance: float
    passed: bool
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "tol": self.tol,
            "dt2_allowance": self.allowance,
            "max_residual": self.max_residual,
            "max_abs_numeric": float(np.max(np.abs(self.numeric))) if self.numeric.size else 0.0,
            "mean_predicted": float(np.mean(self.predicted)) if self.predicted.size else 0.0,
            "passed": self.passed,
            **self.extra,
        }


def residual_report(times, x_mean, predicted, dt: float, tag: str = "", tol: float = 1e-5) -> EhrenfestReport:
    """Compare the finite-difference acceleration with the symbolic prediction.

    ``predicted`` holds ``<-(1/hbar^2)[[X,H],H]>`` at every recorded time;
    interior samples are compared.  The allowance for the second-difference
    truncation error is ``dt^2 * max|d^4<X>/dt^4|`` estimated from fourth
    differences (zero for fewer than five samples).
    """
    times = np.asarray(times, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    num = numeric_acceleration(x_mean, dt)
    pred = predicted[1:-1]
    residual = num - pred
    x = np.asarray(x_mean, dtype=float)
    if x.size >= 5:
        d4 = np.diff(x, 4) / dt**4
        allowance = dt * dt * float(np.max(np.abs(d4))) / 12
    else:
        allowance = 0.0
    passed = bool(np.max(np.abs(residual)) <= tol + allowance)
    return EhrenfestReport(tag, times[1:-1], pred, num, residual, tol, allowance, passed)
