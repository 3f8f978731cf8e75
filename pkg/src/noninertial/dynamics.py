"""Interferometer branches propagated in co-moving frames.

A branch separated by ``dx`` from its partner quickly leaves any truncated
ladder basis centred at the origin.  Each branch is therefore evolved in the
frame that follows the zeroth-order classical trajectory ``(x_c, p_c)``: with
``psi = D(x_c, p_c) phi`` the frame Hamiltonian is

    H(X + x_c, P + p_c) - xdot_c P + pdot_c X,

obtained symbolically by substitution and evaluated per step.  Pure c-number
terms only contribute a branch-global phase and are dropped; terms carrying
``Hrel0``/``Hrel1`` are level dependent and kept.  Every Hamiltonian built by
the factory is block diagonal in the internal level, so each ensemble member
``phi (x) |n>`` is propagated inside its c.m. block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import opalg
from .hilbert import (
    CompiledSeries,
    HilbertModel,
    PropagationAbort,
    gaussian_packet,
    krylov_step,
    level_ops,
)
from .opalg import OperatorSeries


@dataclass(frozen=True)
class ClassicalFrame:
    """Zeroth-order trajectory under constant force ``F`` and optional trap ``omega``."""

    x0: float
    p0: float
    M: float
    F: float = 0.0
    omega: float = 0.0

    def at(self, t: float) -> tuple[float, float, float, float]:
        """``(x, p, xdot, pdot)`` at time ``t``."""
        if self.omega == 0:
            x = self.x0 + self.p0 / self.M * t + 0.5 * self.F / self.M * t * t
            p = self.p0 + self.F * t
            return x, p, p / self.M, self.F
        w = self.omega
        xeq = self.F / (self.M * w * w)
        x = xeq + (self.x0 - xeq) * math.cos(w * t) + self.p0 / (self.M * w) * math.sin(w * t)
        v = -(self.x0 - xeq) * w * math.sin(w * t) + self.p0 / self.M * math.cos(w * t)
        return x, self.M * v, v, self.F - self.M * w * w * x


def frame_series(H: OperatorSeries) -> OperatorSeries:
    """``H`` with ``X -> X + xc`` and ``P_x -> P_x + pc`` (scalars ``xc``, ``pc``)."""
    t = H.table
    out = opalg.substitute(H, "X", t.op("X", None) + t.scalar("xc", 1, None))
    return opalg.substitute(out, "P_x", t.op("P_x", None) + t.scalar("pc", 1, None))


def without_c_numbers(a: OperatorSeries) -> OperatorSeries:
    return opalg.OperatorSeries(a.table, {k: c for k, c in a.terms.items() if k[1]}, a.order, a.truncated)


def linear_force(H: OperatorSeries, m: HilbertModel) -> float:
    """``-dH/dX`` from the zeroth-order part linear in ``X`` alone."""
    h0 = H.eps_coefficient(0)
    k = H.table.op_index("X")
    lin = opalg.OperatorSeries(H.table, {key: c for key, c in h0.terms.items() if key[1] == (k,)}, None)
    if lin.is_zero():
        return 0.0
    values = m.scalars()
    total = 0.0
    for coeff, _, _, scalars in lin:
        v = complex(coeff)
        for name, p in scalars:
            v *= values[name] ** p
        total += v.real
    return -total


@dataclass
class DynamicsResult:
    times: np.ndarray
    x_mean: np.ndarray
    p_mean: np.ndarray
    var_x: np.ndarray
    hrel0_mean: np.ndarray
    visibility: np.ndarray
    norm_defect: np.ndarray
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    control: dict[str, np.ndarray] = field(default_factory=dict)
    hermitian_defect: float = 0.0
    force: float = 0.0

    def columns(self) -> dict[str, np.ndarray]:
        return {"t": self.times, "X": self.x_mean, "P": self.p_mean, "VarX": self.var_x,
                "Hrel0": self.hrel0_mean, "V": self.visibility, "norm_defect": self.norm_defect}


class _Level:
    """Compiled frame operators for one internal level."""

    def __init__(self, H: OperatorSeries, m: HilbertModel, n: int, extra: Mapping[str, OperatorSeries]):
        ops = level_ops(m, n)
        self.n = n
        # c.m. blocks are small; dense arithmetic is much faster than sparse here
        self.H = CompiledSeries(H, m, ops=ops, dense=True)
        self.extra = {k: CompiledSeries(v, m, ops=ops, drop_rest_energy=False, dense=True)
                      for k, v in extra.items()}
        self.X = ops["X"].toarray()
        self.P = ops["P_x"].toarray()
        self.X2 = self.X @ self.X
        self.P2 = self.P @ self.P
        self.E0 = float(m.internal_energy(n))


def run_branches(H: OperatorSeries, m: HilbertModel, weights, *, center: float, dx: float,
                 width: float | None, momentum: float, dt: float, steps: int, krylov_dim: int = 20,
                 tol: float = 1e-12, trap: bool = False,
                 control: Callable[[float, dict], dict] | None = None,
                 extra: Mapping[str, OperatorSeries] | None = None,
                 max_defect: float = 1e-9) -> DynamicsResult:
    """Propagate both branches of every thermal level and record the CSV observables.

    ``control(t, moments)`` returns scalar bindings (e.g. ``u1``) from the
    ensemble moments ``X, P, X2, P2, Hrel0`` of the lab-frame state; it is
    re-evaluated at the midpoint of every step after a half-step predictor.
    ``extra`` series are recorded as ensemble expectation values.
    """
    extra = dict(extra or {})
    weights = np.asarray(weights, dtype=float)
    F = linear_force(H, m)
    omega = m.omega_cm if trap else 0.0
    Hf = without_c_numbers(frame_series(H))
    extra_f = {k: frame_series(v) for k, v in extra.items()}
    levels = [_Level(Hf, m, n, extra_f) for n in range(len(weights))]
    hbar = m.hbar
    frames = {"up": ClassicalFrame(center + dx / 2, momentum, m.M, F, omega),
              "down": ClassicalFrame(center - dx / 2, momentum, m.M, F, omega)}
    phi0 = gaussian_packet(0.0, width, m)
    states = {(b, L.n): phi0.astype(complex).copy() for b in frames for L in levels}

    def frame_matrix(L: _Level, branch: str, t: float, bind: dict) -> np.ndarray:
        x, p, xd, pd = frames[branch].at(t)
        Hm = L.H(xc=x, pc=p, **bind) - L.P * xd + L.X * pd
        if omega:
            Hm = Hm + (L.X2 * 0.5 + L.X * x) * (m.M * omega * omega)
        return (Hm + Hm.conj().T) * 0.5

    def moments(t: float, st: dict) -> dict:
        acc = dict.fromkeys(("X", "P", "X2", "P2", "Hrel0"), 0.0)
        for L, w in zip(levels, weights):
            for b in frames:
                v = st[(b, L.n)]
                x, p, _, _ = frames[b].at(t)
                ex = np.vdot(v, L.X @ v).real
                ep = np.vdot(v, L.P @ v).real
                half = 0.5 * w
                acc["X"] += half * (x + ex)
                acc["P"] += half * (p + ep)
                acc["X2"] += half * (np.vdot(v, L.X2 @ v).real + 2 * x * ex + x * x)
                acc["P2"] += half * (np.vdot(v, L.P2 @ v).real + 2 * p * ep + p * p)
                acc["Hrel0"] += half * L.E0
        return acc

    rec: dict[str, list] = {k: [] for k in ("t", "X", "P", "VarX", "Hrel0", "V", "norm_defect")}
    rec_extra: dict[str, list] = {k: [] for k in extra}
    rec_ctrl: dict[str, list] = {}

    def record(t: float, st: dict, bind: dict, defect: float) -> None:
        mo = moments(t, st)
        var = 0.0
        overlap = 0j
        for L, w in zip(levels, weights):
            overlap += w * np.vdot(st[("up", L.n)], st[("down", L.n)])
            for b in frames:
                v = st[(b, L.n)]
                ex = np.vdot(v, L.X @ v).real
                var += 0.5 * w * (np.vdot(v, L.X2 @ v).real - ex * ex)
        rec["t"].append(t)
        rec["X"].append(mo["X"])
        rec["P"].append(mo["P"])
        rec["VarX"].append(var)
        rec["Hrel0"].append(mo["Hrel0"])
        rec["V"].append(abs(overlap))
        rec["norm_defect"].append(defect)
        for k in extra:
            val = 0.0
            for L, w in zip(levels, weights):
                for b in frames:
                    x, p, _, _ = frames[b].at(t)
                    v = st[(b, L.n)]
                    val += 0.5 * w * np.vdot(v, L.extra[k](xc=x, pc=p, **bind) @ v).real
            rec_extra[k].append(val)
        for k, v in bind.items():
            rec_ctrl.setdefault(k, []).append(v)

    step = 0
    try:
        herm = 0.0
        bind0 = control(0.0, moments(0.0, states)) if control else {}
        for L in levels:
            for b in frames:
                x, p, xd, pd = frames[b].at(0.0)
                raw = L.H(xc=x, pc=p, **bind0)
                if not np.all(np.isfinite(raw)):
                    raise PropagationAbort(0, "generator has non-finite entries")
                scale = max(np.abs(raw).max(), 1e-300)
                herm = max(herm, np.abs(raw - raw.conj().T).max() / scale)
        record(0.0, states, bind0, 0.0)
        for step in range(1, steps + 1):
            t = (step - 1) * dt
            tm = t + dt / 2
            if control:
                bind_now = control(t, moments(t, states))
                mid = {}
                for L in levels:
                    for b in frames:
                        mid[(b, L.n)] = krylov_step(frame_matrix(L, b, t, bind_now), states[(b, L.n)],
                                                    dt / 2, hbar, krylov_dim, tol)
                bind = control(tm, moments(tm, mid))
            else:
                bind = {}
            worst = 0.0
            new = {}
            for L in levels:
                for b in frames:
                    v = states[(b, L.n)]
                    try:
                        w_ = krylov_step(frame_matrix(L, b, tm, bind), v, dt, hbar, krylov_dim, tol)
                    except PropagationAbort as exc:
                        raise PropagationAbort(step, exc.reason) from None
                    before = np.linalg.norm(v)
                    d = abs(np.linalg.norm(w_) - before) / before
                    if not np.isfinite(d) or d > max_defect:
                        raise PropagationAbort(step, f"unitarity defect {d:.3e} exceeds {max_defect:g}")
                    worst = max(worst, d)
                    new[(b, L.n)] = w_
            states = new
            record(step * dt, states, bind, worst)
    except (OverflowError, FloatingPointError) as exc:
        raise PropagationAbort(step, f"floating-point overflow: {exc}") from None

    arr = {k: np.array(v) for k, v in rec.items()}
    return DynamicsResult(arr["t"], arr["X"], arr["P"], arr["VarX"], arr["Hrel0"], arr["V"], arr["norm_defect"],
                          {k: np.array(v) for k, v in rec_extra.items()},
                          {k: np.array(v) for k, v in rec_ctrl.items()}, float(herm), F)


def frozen_phases(H: OperatorSeries, m: HilbertModel, n_levels: int, x_up: float, x_down: float) -> np.ndarray:
    """Level-dependent energy difference between branches with the c.m. frozen.

    ``X`` is replaced by the branch position and ``P_x`` by zero; only terms
    that carry an internal operator are kept, the rest is a common phase.
    """
    t = H.table
    frozen = opalg.substitute(H, "X", t.scalar("xc", 1, None))
    frozen = opalg.substitute(frozen, "P_x", t.zero(None))
    frozen = without_c_numbers(frozen)
    out = np.empty(n_levels)
    for n in range(n_levels):
        comp = CompiledSeries(frozen, m, ops={k: v[:1, :1] for k, v in level_ops(m, n).items()})
        e_up = comp(xc=x_up).toarray()[0, 0]
        e_dn = comp(xc=x_down).toarray()[0, 0]
        out[n] = (e_up - e_dn).real
    return out


def frozen_visibility(H: OperatorSeries, m: HilbertModel, weights, x_up: float, x_down: float,
                      times) -> np.ndarray:
    """``|sum_n p_n exp(-i dE_n t/hbar)|`` for the frozen c.m. (pure phase evolution)."""
    weights = np.asarray(weights, dtype=float)
    dE = frozen_phases(H, m, len(weights), x_up, x_down)
    dE = dE - dE[0]
    times = np.asarray(times, dtype=float)
    return np.abs(np.exp(-1j * np.outer(times, dE) / m.hbar) @ weights)
