"""Truncated Hilbert spaces, matrix bindings and unitary propagation.

The c.m. degree of freedom lives in a harmonic-ladder basis of dimension
``D_cm`` (reference frequency ``omega_cm``, mass ``M``); the internal one in a
number basis of dimension ``D_int`` with ``Hrel0 = hbar omega_int (n + 1/2)``
and ``Hrel1 = -lam (n + 1/2)^2``.  The full space is ``cm (x) internal`` with
index ``i_cm * D_int + n``.  Units are dimensionless with ``hbar = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import opalg
from .opalg import OperatorSeries, SymbolTable


class BindingError(ValueError):
    pass


class SupportError(ValueError):
    pass


class PropagationAbort(RuntimeError):
    def __init__(self, step: int, reason: str):
        self.step = step
        self.reason = reason
        super().__init__(f"propagation aborted at step {step}: {reason}")


BULK_FRACTION = 0.8
BULK_TOL = 1e-8
HERMITIAN_TOL = 1e-12
ROUNDING_FLOOR = 1e-14


# -- operators ----------------------------------------------------------------------

def ladder(D: int) -> sp.csr_matrix:
    """Annihilation operator on ``D`` levels."""
    return sp.diags(np.sqrt(np.arange(1, D, dtype=float)), 1, shape=(D, D), format="csr")


def position_momentum(D: int, M: float, omega: float, hbar: float = 1.0):
    a = ladder(D)
    ad = a.T.tocsr()
    x0 = math.sqrt(hbar / (M * omega))
    p0 = math.sqrt(hbar * M * omega)
    X = (a + ad) * (x0 / math.sqrt(2))
    P = (ad - a) * (1j * p0 / math.sqrt(2))
    return X.astype(complex).tocsr(), P.tocsr()


@dataclass
class SparseOperator:
    """Complex sparse matrix on a tensor-product space with its dimension tag."""

    matrix: sp.csr_matrix
    dims: tuple[int, int]
    observable: bool = False

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix, dtype=complex)
        if self.observable:
            d = self.hermitian_defect()
            if d > HERMITIAN_TOL:
                raise BindingError(f"observable is not Hermitian (defect {d:.3e})")

    def hermitian_defect(self) -> float:
        diff = self.matrix - self.matrix.getH()
        scale = max(spla.norm(self.matrix), 1e-300)
        return float(spla.norm(diff) / scale)

    def hermitian_part(self) -> "SparseOperator":
        return SparseOperator((self.matrix + self.matrix.getH()) * 0.5, self.dims)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __add__(self, other):
        return SparseOperator(self.matrix + _mat(other), self.dims)

    def __sub__(self, other):
        return SparseOperator(self.matrix - _mat(other), self.dims)

    def __matmul__(self, v):
        return self.matrix @ v


def _mat(a):
    return a.matrix if isinstance(a, SparseOperator) else a


@dataclass
class BindingReport:
    checks: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": self.checks}


@dataclass
class HilbertModel:
    D_cm: int
    D_int: int
    M: float = 1.0
    omega_cm: float = 1e-2
    omega_int: float = 1.0
    lam: float = 0.0
    c: float = 10.0
    g: float = 0.0
    hbar: float = 1.0
    table: SymbolTable | None = None
    ops: dict = field(default_factory=dict)
    cm_ops: dict = field(default_factory=dict)
    levels: np.ndarray | None = None
    validation: BindingReport = field(default_factory=BindingReport)

    @property
    def dim(self) -> int:
        return self.D_cm * self.D_int

    @property
    def eps(self) -> float:
        return 1.0 / self.c**2

    @property
    def sigma0(self) -> float:
        return math.sqrt(self.hbar / (self.M * self.omega_cm))

    def scalars(self, **extra) -> dict[str, float]:
        out = {"hbar": self.hbar, "M": self.M, "g": self.g, "omega": self.omega_int,
               "lam": self.lam, "alpha": 0.5, "beta": 0.5}
        out.update(extra)
        return out

    def internal_energy(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return self.hbar * self.omega_int * (n + 0.5)

    def internal_energy1(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return -self.lam * (n + 0.5) ** 2

    def basis_state(self, psi_cm: np.ndarray, n: int) -> np.ndarray:
        e = np.zeros(self.D_int, dtype=complex)
        e[n] = 1.0
        return np.kron(psi_cm, e)


def make_model(D_cm: int, D_int: int, M=1.0, omega_cm=1e-2, omega_int=1.0, lam=0.0, c=10.0, g=0.0,
               hbar=1.0, validate: bool = True) -> HilbertModel:
    if D_cm < 2 or D_int < 2:
        raise BindingError("dimensions must be >= 2")
    m = HilbertModel(D_cm, D_int, float(M), float(omega_cm), float(omega_int), float(lam), float(c),
                     float(g), float(hbar), opalg.cm_table(1, order=None))
    Xc, Pc = position_momentum(D_cm, m.M, m.omega_cm, m.hbar)
    n = np.arange(D_int)
    e0 = sp.diags(m.internal_energy(n).astype(complex), format="csr")
    e1 = sp.diags(m.internal_energy1(n).astype(complex), format="csr")
    Icm, Iint = sp.identity(D_cm, complex, "csr"), sp.identity(D_int, complex, "csr")
    m.cm_ops = {"X": Xc, "P_x": Pc}
    m.ops = {
        "X": sp.kron(Xc, Iint, "csr"),
        "P_x": sp.kron(Pc, Iint, "csr"),
        "Hrel0": sp.kron(Icm, e0, "csr"),
        "Hrel1": sp.kron(Icm, e1, "csr"),
    }
    m.levels = n
    m.validation = validate_bindings(m)
    if validate and not m.validation.passed:
        bad = [c for c in m.validation.checks if not c["passed"]]
        raise BindingError("binding validation failed: " + "; ".join(
            f"{c['rule']} residual {c['residual']:.3e}" for c in bad))
    return m


def build_model(cfg, validate: bool = True) -> HilbertModel:
    """Model for a :class:`~noninertial.opexpr.ScenarioConfig`."""
    return make_model(cfg.D_cm, cfg.D_int, cfg.M, cfg.omega_cm, cfg.omega_int, cfg.lam, cfg.c, cfg.g,
                      validate=validate)


def bulk_projector(D_cm: int, D_int: int) -> sp.csr_matrix:
    kc, ki = math.ceil(BULK_FRACTION * D_cm), math.ceil(BULK_FRACTION * D_int)
    pc = np.zeros(D_cm)
    pc[:kc] = 1
    pi = np.zeros(D_int)
    pi[:ki] = 1
    return sp.diags(np.kron(pc, pi).astype(complex), format="csr")


def validate_bindings(m: HilbertModel) -> BindingReport:
    """Hermiticity of every bound operator and every declared rule on the bulk."""
    report = BindingReport()
    for name, A in m.ops.items():
        d = SparseOperator(A, (m.D_cm, m.D_int)).hermitian_defect()
        report.checks.append({"rule": f"hermitian({name})", "residual": d, "passed": d <= HERMITIAN_TOL})
    Pi = bulk_projector(m.D_cm, m.D_int)
    names = list(m.ops)
    table = m.table
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            expected = opalg.commutator(table.op(a, None), table.op(b, None))
            E = evaluate(expected, m).matrix
            A, B = m.ops[a], m.ops[b]
            R = Pi @ (A @ B - B @ A - E) @ Pi
            scale = spla.norm(Pi @ E @ Pi)
            if scale == 0:
                scale = max(spla.norm(Pi @ A @ B @ Pi), 1.0)
            res = float(spla.norm(R) / scale)
            report.checks.append({"rule": f"[{a},{b}]", "residual": res, "passed": res <= BULK_TOL})
    return report


# -- evaluation -------------------------------------------------------------------------

class CompiledSeries:
    """Series pre-multiplied into one matrix per operator word.

    Calling the object with scalar values returns the sparse matrix.  Scalar
    terms with negative ``eps`` power (rest energy) are dropped and listed in
    ``dropped``.
    """

    def __init__(self, a: OperatorSeries, m: HilbertModel, drop_rest_energy: bool = True,
                 ops: Mapping[str, sp.csr_matrix] | None = None, dense: bool = False):
        self.model = m
        self.ops = m.ops if ops is None else ops
        self.dim = next(iter(self.ops.values())).shape[0]
        self.dropped: list[str] = []
        words: dict[tuple, list] = {}
        cache: dict[tuple, sp.csr_matrix] = {}
        for coeff, e, factors, scalars in a:
            if e < 0 and not factors and drop_rest_energy:
                self.dropped.append(f"{complex(coeff)}*{scalars}*eps^{e}")
                continue
            if factors not in cache:
                cache[factors] = _word_matrix(factors, self.ops, self.dim)
            words.setdefault(factors, []).append((complex(coeff), e, scalars))
        self.dense = dense
        if dense:
            cache = {k: v.toarray() for k, v in cache.items()}
        self.terms = [(cache[f], monos) for f, monos in words.items()]
        self.symbols = {n for _, monos in self.terms for _, _, s in monos for n, _ in s}

    def coefficients(self, values: Mapping[str, float]) -> list[complex]:
        eps = self.model.eps
        out = []
        for _, monos in self.terms:
            total = 0j
            for c, e, scalars in monos:
                v = c * eps**e
                for name, p in scalars:
                    try:
                        v *= values[name] ** p
                    except KeyError:
                        raise BindingError(f"unbound scalar symbol {name!r}") from None
                total += v
            out.append(total)
        return out

    def __call__(self, **extra) -> sp.csr_matrix:
        values = self.model.scalars(**extra)
        if self.dense:
            out = np.zeros((self.dim, self.dim), dtype=complex)
            for (mat, _), c in zip(self.terms, self.coefficients(values)):
                if c:
                    out += c * mat
            return out
        out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for (mat, _), c in zip(self.terms, self.coefficients(values)):
            if c:
                out = out + mat * c
        return out


def _word_matrix(factors: tuple, ops: Mapping[str, sp.csr_matrix], dim: int) -> sp.csr_matrix:
    out = sp.identity(dim, complex, "csr")
    for name, p in factors:
        if name not in ops:
            raise BindingError(f"unbound operator symbol {name!r}")
        for _ in range(p):
            out = out @ ops[name]
    return out.tocsr()


def level_ops(m: HilbertModel, n: int) -> dict[str, sp.csr_matrix]:
    """c.m.-sector bindings seen by ensemble members with internal level ``n``."""
    I = sp.identity(m.D_cm, complex, "csr")
    return {"X": m.cm_ops["X"], "P_x": m.cm_ops["P_x"],
            "Hrel0": I * float(m.internal_energy(n)), "Hrel1": I * float(m.internal_energy1(n))}


def evaluate(a: OperatorSeries, m: HilbertModel, **scalars) -> SparseOperator:
    """Matrix of ``a`` with products taken literally in stored order and ``eps = 1/c^2``."""
    return SparseOperator(CompiledSeries(a, m)(**scalars), (m.D_cm, m.D_int))


# -- states ------------------------------------------------------------------------------

def thermal_nmax(nbar: float, tail: float = 1e-10) -> int:
    """Smallest cutoff whose geometric tail ``q**(n_max+1)`` is below ``tail``."""
    if nbar == 0:
        return 0
    q = nbar / (nbar + 1.0)
    n = max(0, math.floor(math.log(tail) / math.log(q)))
    # guard the float log ratio on both sides
    while q ** (n + 1) >= tail:
        n += 1
    while n > 0 and q**n < tail:
        n -= 1
    return n


def thermal_weights(nbar: float, n_max: int | None = None, tail: float = 1e-10) -> np.ndarray:
    """Occupation probabilities ``p_n ~ q**n`` for ``n = 0..n_max``, renormalized."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if nbar == 0:
        p = np.zeros(1 if n_max is None else n_max + 1)
        p[0] = 1.0
        return p
    q = nbar / (nbar + 1.0)
    need = thermal_nmax(nbar, tail)
    if n_max is None:
        n_max = need
    elif q ** (n_max + 1) >= tail:
        raise ValueError(f"n_max = {n_max} leaves a thermal tail >= {tail:g}; use n_max >= {need}")
    p = (1 - q) * q ** np.arange(n_max + 1)
    return p / p.sum()


def hermite_functions(D: int, x: np.ndarray, sigma: float) -> np.ndarray:
    """Normalized oscillator eigenfunctions ``h_k(x)``, shape ``(D, len(x))``."""
    xi = np.asarray(x, dtype=float) / sigma
    out = np.empty((D, xi.size))
    out[0] = np.pi**-0.25 * np.exp(-xi**2 / 2) / math.sqrt(sigma)
    if D > 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for k in range(1, D - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * xi * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def gaussian_packet(center: float, width: float | None, m: HilbertModel, momentum: float = 0.0,
                    min_fidelity: float = 1 - 1e-6) -> np.ndarray:
    """Gaussian ``exp(-(x-x0)^2/2w^2 + i p0 x/hbar)`` expanded in the c.m. ladder basis."""
    s0 = m.sigma0
    w = s0 if width is None else float(width)
    D = m.D_cm
    reach = s0 * (math.sqrt(2 * D + 1) + 10)
    lo, hi = min(-reach, center - 12 * w), max(reach, center + 12 * w)
    step = min(0.05 * w, 0.1 * s0 / math.sqrt(2 * D + 1))
    if momentum:
        step = min(step, 0.3 * m.hbar / abs(momentum))
    n = int(math.ceil((hi - lo) / step)) + 1
    if n > 2_000_000:
        raise SupportError("packet cannot be resolved on the quadrature grid")
    x = np.linspace(lo, hi, n)
    dx = x[1] - x[0]
    psi = np.exp(-((x - center) ** 2) / (2 * w * w) + 1j * momentum * x / m.hbar)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * dx)
    coeffs = hermite_functions(D, x, s0) @ psi * dx
    fidelity = float(np.sum(np.abs(coeffs) ** 2))
    if fidelity < min_fidelity:
        raise SupportError(f"packet not supported by the basis: fidelity {fidelity:.3e} < {min_fidelity}")
    return coeffs / np.linalg.norm(coeffs)


@dataclass
class EnsembleMember:
    weight: float
    up: np.ndarray
    down: np.ndarray
    level: int = 0


@dataclass
class QuantumState:
    """Thermal ensemble of interferometer branch pairs."""

    members: list[EnsembleMember]

    def validate(self) -> "QuantumState":
        w = np.array([mm.weight for mm in self.members])
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("ensemble weights must be non-negative and sum to 1")
        for mm in self.members:
            for v in (mm.up, mm.down):
                if abs(np.linalg.norm(v) - 1) > 1e-9:
                    raise ValueError("branch vectors must be normalized")
        return self


def branch_overlap(state: QuantumState) -> complex:
    return sum(mm.weight * np.vdot(mm.up, mm.down) for mm in state.members)


def visibility(states: Sequence[QuantumState] | QuantumState) -> np.ndarray:
    """``V = |sum_n p_n <up_n|down_n>|`` for one state or along a trajectory."""
    if isinstance(states, QuantumState):
        states = [states]
    out = []
    shape = None
    for s in states:
        sig = tuple(mm.weight for mm in s.members)
        if shape is None:
            shape = sig
        elif len(sig) != len(shape):
            raise ValueError("mismatched ensemble structure along trajectory")
        out.append(abs(branch_overlap(s)))
    return np.array(out)


def partial_trace_cm(state, D_cm: int, D_int: int) -> np.ndarray:
    """Reduced c.m. density matrix of a pure vector or a list of ``(weight, vector)``."""
    if isinstance(state, np.ndarray):
        state = [(1.0, state)]
    rho = np.zeros((D_cm, D_cm), dtype=complex)
    for w, v in state:
        psi = np.asarray(v, dtype=complex).reshape(D_cm, D_int)
        rho += w * psi @ psi.conj().T
    return rho


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


# -- propagation -------------------------------------------------------------------------

def krylov_expm(H, v: np.ndarray, tau: complex, m: int = 20, tol: float = 1e-12):
    """``exp(tau H) v`` for Hermitian ``H`` by Lanczos with full reorthogonalization.

    Returns ``(w, error_estimate)``; the estimate is the usual
    ``beta_{k+1} |[exp(tau T_k) e_1]_k|`` bound scaled by ``|v|``.
    """
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy(), 0.0
    n = v.size
    m = min(m, n)
    V = np.empty((m + 1, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m + 1)
    V[0] = v / beta0
    err = 0.0
    for k in range(m):
        w = H @ V[k]
        alpha[k] = np.vdot(V[k], w).real
        w = w - alpha[k] * V[k] - (beta[k] * V[k - 1] if k else 0)
        w -= V[: k + 1].T @ (V[: k + 1].conj() @ w)
        beta[k + 1] = np.linalg.norm(w)
        if not (np.isfinite(alpha[k]) and np.isfinite(beta[k + 1])):
            raise PropagationAbort(-1, "generator produced non-finite values")
        y = _tridiag_expm_e1(alpha[: k + 1], beta[1 : k + 1], tau)
        err = beta0 * beta[k + 1] * abs(y[-1])
        if beta[k + 1] <= 1e-14 * max(1.0, abs(alpha[k])) or err <= tol:
            return beta0 * (V[: k + 1].T @ y), err
        V[k + 1] = w / beta[k + 1]
    return beta0 * (V[: k + 1].T @ y), err


def _tridiag_expm_e1(alpha: np.ndarray, offdiag: np.ndarray, tau: complex) -> np.ndarray:
    from scipy.linalg import eigh_tridiagonal

    if alpha.size == 1:
        return np.array([np.exp(tau * alpha[0])])
    lam, S = eigh_tridiagonal(alpha, offdiag)
    return S @ (np.exp(tau * lam) * S[0])


def krylov_step(H, v: np.ndarray, dt: float, hbar: float = 1.0, m: int = 20, tol: float = 1e-12,
                depth: int = 0) -> np.ndarray:
    """One step ``exp(-i H dt/hbar) v``; splits the step while the Krylov estimate exceeds ``tol``."""
    w, err = krylov_expm(H, v, -1j * dt / hbar, m, tol)
    # sub-steps share the tolerance, but never below what rounding allows
    if err <= max(tol, ROUNDING_FLOOR * np.linalg.norm(v)):
        return w
    if depth > 20:
        raise PropagationAbort(-1, f"Krylov error {err:.3e} above tolerance after step splitting")
    half = krylov_step(H, v, dt / 2, hbar, m, tol / 2, depth + 1)
    return krylov_step(H, half, dt / 2, hbar, m, tol / 2, depth + 1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[np.ndarray]
    expectations: dict[str, np.ndarray]
    norm_defects: np.ndarray


def _hermitian_defect(H) -> float:
    if sp.issparse(H):
        return SparseOperator(H, (H.shape[0], 1)).hermitian_defect()
    H = np.asarray(H)
    return float(np.linalg.norm(H - H.conj().T) / max(np.linalg.norm(H), 1e-300))


def expectation(A, v: np.ndarray) -> complex:
    return complex(np.vdot(v, _mat(A) @ v))


def propagate(H, psi0: np.ndarray, dt: float, steps: int, *, hbar: float = 1.0, krylov_dim: int = 20,
              tol: float = 1e-12, observables: Mapping[str, object] | None = None,
              state_dependent: bool = False, max_defect: float = 1e-9, keep_states: bool = True) -> Trajectory:
    """Short-time Krylov propagation of ``psi0``.

    ``H`` is a matrix, a callable ``H(t)`` (evaluated at the step midpoint) or,
    with ``state_dependent=True``, a callable ``H(t, psi)`` used with a
    half-step predictor.  Raises :class:`PropagationAbort` when the generator
    is not Hermitian or the per-step norm change exceeds ``max_defect``.
    """
    observables = dict(observables or {})
    psi = np.asarray(psi0, dtype=complex).copy()
    times = [0.0]
    states = [psi.copy()] if keep_states else []
    obs = {k: [expectation(A, psi)] for k, A in observables.items()}
    defects = [0.0]
    for step in range(1, steps + 1):
        t = (step - 1) * dt
        if callable(H) and not hasattr(H, "shape"):
            if state_dependent:
                Hp = _mat(H(t, psi))
                mid = krylov_step(Hp, psi, dt / 2, hbar, krylov_dim, tol)
                Hs = _mat(H(t + dt / 2, mid))
            else:
                Hs = _mat(H(t + dt / 2))
        else:
            Hs = _mat(H)
        if step == 1 or callable(H):
            d = _hermitian_defect(Hs)
            if d > HERMITIAN_TOL:
                raise PropagationAbort(step, f"generator is not Hermitian (defect {d:.3e})")
        before = np.linalg.norm(psi)
        try:
            new = krylov_step(Hs, psi, dt, hbar, krylov_dim, tol)
        except PropagationAbort as exc:
            raise PropagationAbort(step, exc.reason) from None
        defect = abs(np.linalg.norm(new) - before) / before
        if not np.isfinite(defect) or defect > max_defect:
            raise PropagationAbort(step, f"unitarity defect {defect:.3e} exceeds {max_defect:g}")
        psi = new
        times.append(step * dt)
        if keep_states:
            states.append(psi.copy())
        for k, A in observables.items():
            obs[k].append(expectation(A, psi))
        defects.append(defect)
    return Trajectory(np.array(times), states, {k: np.array(v) for k, v in obs.items()}, np.array(defects))
