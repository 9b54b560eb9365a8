"""Time evolution ``rho(t) = exp(L t) rho(0)``, directly and through the eigen-decomposition."""
import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.sparse import linalg as spla

from . import operators as ops
from .errors import DecompositionUnavailableError, InvalidStateError, ParameterError
from .liouville import build_liouvillian
from .models import two_level_model

# explicit supermatrices up to this size are exponentiated densely
DENSE_EXPM_LIMIT = 1024
KRYLOV_TOL = 1e-10
# biorthogonal Gram matrices worse conditioned than this are treated as defective
COND_LIMIT = 1e10


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: list = field(default_factory=list)
    tracks: dict = field(default_factory=dict)

    def max_trace_error(self):
        return max((abs(np.trace(s) - 1) for s in self.states), default=0.0)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.tracks)
        w.writerow(["t", *names])
        for i, t in enumerate(self.times):
            w.writerow([f"{t:.12g}", *(f"{self.tracks[n][i]:.15g}" for n in names)])
        return buf.getvalue()


def _check_state(rho, tol=1e-8):
    rho = ops.dense(rho)
    if not ops.is_hermitian(rho, tol):
        raise InvalidStateError("initial state is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidStateError(f"initial state has trace {np.trace(rho):.6g}, expected 1")
    return rho


def krylov_expm(matvec, v, t, m=30, tol=KRYLOV_TOL):
    """``exp(t A) v`` by Arnoldi projection with step halving on the error estimate."""
    v = np.asarray(v, dtype=complex)
    n = v.shape[0]
    m = min(m, n)
    done, dt = 0.0, t
    w = v.copy()
    while done < t:
        beta = np.linalg.norm(w)
        if beta == 0:
            return w
        basis = np.zeros((n, m + 1), dtype=complex)
        h = np.zeros((m + 1, m), dtype=complex)
        basis[:, 0] = w / beta
        size = m
        for j in range(m):
            q = matvec(basis[:, j])
            for i in range(j + 1):
                h[i, j] = np.vdot(basis[:, i], q)
                q = q - h[i, j] * basis[:, i]
            # one reorthogonalization pass
            for i in range(j + 1):
                c = np.vdot(basis[:, i], q)
                h[i, j] += c
                q = q - c * basis[:, i]
            h[j + 1, j] = np.linalg.norm(q)
            if h[j + 1, j] <= 1e-14 * beta:
                size = j + 1
                break
            basis[:, j + 1] = q / h[j + 1, j]
        hm = h[:size, :size]
        tail = h[size, size - 1] if size < m + 1 else 0.0
        dt = min(dt, t - done)
        while True:
            e = la.expm(dt * hm)[:, 0]
            err = beta * abs(tail * dt * e[-1])
            if err <= tol * beta * dt / t or dt < 1e-12 * t:
                break
            dt = 0.5 * dt
        w = beta * (basis[:, :size] @ e)
        done += dt
    return w


def evolve_expm(sm, rho0, t, check=True, tol=KRYLOV_TOL):
    """``exp(L t) rho0``.

    Small explicit supermatrices are exponentiated densely (scaling and squaring),
    larger ones use scipy's ``expm_multiply`` and matrix-free operators a Krylov
    propagator. ``check`` validates that ``rho0`` is a unit-trace Hermitian matrix.
    """
    if not t >= 0:
        raise ParameterError(f"evolution time must be >= 0, got {t}")
    rho0 = _check_state(rho0) if check else ops.dense(rho0)
    if t == 0:
        return rho0.copy()
    v = sm.restrict(rho0)
    if sm.is_explicit and sm.size <= DENSE_EXPM_LIMIT:
        out = la.expm(t * sm.matrix.toarray()) @ v
    elif sm.is_explicit:
        out = spla.expm_multiply(sm.matrix, v, start=0, stop=t, num=2, endpoint=True)[-1]
    else:
        out = krylov_expm(sm.matvec, v, t, tol=tol)
    return sm.lift(out)


def evolve_trajectory(sm, rho0, times, observables=None, check=True):
    """States at the sorted ``times`` (stepping between samples) and expectation tracks."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ParameterError("times must be non-negative and sorted")
    rho = _check_state(rho0) if check else ops.dense(rho0)
    rec = TrajectoryRecord(times)
    prev = 0.0
    for t in times:
        rho = evolve_expm(sm, rho, t - prev, check=False)
        prev = t
        rec.states.append(rho)
    for name, op in (observables or {}).items():
        o = ops.dense(op)
        rec.tracks[name] = np.array([np.trace(o @ s).real for s in rec.states])
    return rec


def decompose_state(rho0, spectrum, sm=None):
    """Coefficients ``c_i`` with ``rho0 = sum_i c_i rho_i`` over ``spectrum.pairs``.

    With left eigenmatrices ``c = G^-1 <L_i, rho0>`` where ``G`` is the left/right Gram
    matrix (the identity for a biorthonormal set); otherwise the spectrum must be complete
    and the right eigenmatrices are inverted directly. Defective (Jordan) spectra make the
    eigenbasis ill-conditioned and are rejected.
    """
    rho0 = ops.dense(rho0)
    pairs = spectrum.pairs
    full = ops.vectorize if sm is None else sm.restrict
    right = np.column_stack([full(p.right) for p in pairs])
    x = full(rho0)
    if all(p.left is not None for p in pairs):
        left = np.column_stack([full(p.left) for p in pairs])
        gram = left.conj().T @ right
        rhs = left.conj().T @ x
    elif right.shape[0] == right.shape[1]:
        gram, rhs = right, x
    else:
        raise DecompositionUnavailableError(
            "partial spectrum without left eigenmatrices; recompute with left=True")
    vals = np.array([p.value for p in pairs])
    unit = right / np.linalg.norm(right, axis=0)
    close = np.abs(vals[:, None] - vals[None, :]) <= 1e-6 * max(1.0, np.abs(vals).max())
    parallel = np.abs(unit.conj().T @ unit) >= 1 - 1e-6
    if np.any(np.triu(close & parallel, 1)):
        raise DecompositionUnavailableError(
            "coalescing eigenpairs: the Liouvillian is defective here, check detect_jordan")
    cond = np.linalg.cond(gram)
    if not cond < COND_LIMIT:
        raise DecompositionUnavailableError(
            f"eigenbasis condition number {cond:.2e}: the Liouvillian is (nearly) "
            "defective here, check detect_jordan")
    return np.linalg.solve(gram, rhs)


def propagate_spectral(coeffs, spectrum, t):
    """``sum_i c_i exp(lambda_i t) rho_i``; conjugate pairs combine into a Hermitian result."""
    if not t >= 0:
        raise ParameterError(f"evolution time must be >= 0, got {t}")
    out = sum(c * np.exp(p.value * t) * p.right for c, p in zip(coeffs, spectrum.pairs))
    return np.asarray(out)


def jordan_formulas(omega, epsilon, gamma, b, times):
    """Closed-form ``<sigma_x>(t)`` and ``<sigma_y>(t)`` at the exceptional point."""
    times = np.asarray(times, dtype=float)
    env = 2 * np.exp(-(gamma + 0.5 * epsilon) * times)
    lin = times * omega * (b.real + b.imag)
    return env * (lin + b.real), env * (lin - b.imag)


@dataclass
class JordanDecay:
    times: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    sx_formula: np.ndarray
    sy_formula: np.ndarray

    @property
    def rel_error(self):
        """Largest deviation from the closed forms, relative to each track's peak."""
        ex = np.max(np.abs(self.sx - self.sx_formula)) / max(np.max(np.abs(self.sx_formula)), 1e-300)
        ey = np.max(np.abs(self.sy - self.sy_formula)) / max(np.max(np.abs(self.sy_formula)), 1e-300)
        return float(max(ex, ey))


def jordan_decay_check(omega, epsilon, gamma, b, times, a=0.5, rtol=1e-12):
    """Evolve ``[[a, b], [b*, 1-a]]`` in the two-level model at ``omega == gamma``."""
    if abs(omega - gamma) > rtol * max(abs(gamma), 1.0):
        raise ParameterError(f"not at the Jordan point: omega={omega} != gamma={gamma}")
    b = complex(b)
    model = two_level_model(omega, epsilon, gamma)
    sm = build_liouvillian(model)
    rho0 = np.array([[a, b], [np.conj(b), 1 - a]], dtype=complex)
    rec = evolve_trajectory(sm, rho0, times, {
        "sx": ops.sigma_x(), "sy": ops.sigma_y(), "sz": ops.sigma_z()})
    fx, fy = jordan_formulas(omega, epsilon, gamma, b, rec.times)
    return JordanDecay(rec.times, rec.tracks["sx"], rec.tracks["sy"], rec.tracks["sz"], fx, fy)
