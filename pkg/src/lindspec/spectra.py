"""Eigen-analysis of Liouvillians: spectra, steady state, gap, eigenmatrix splitting."""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy import sparse
from scipy.sparse import linalg as spla

from . import operators as ops
from .errors import (ConvergenceError, DegenerateKernelError, DimensionOverflowError,
                     InvalidStateError, PairingError, SplitUndefinedError)

DENSE_LIMIT = 10_000
ZERO_TOL_REL = 1e-12
IM_TOL_REL = 1e-8
JORDAN_RANK_TOL = 1e-8


@dataclass
class EigenPair:
    value: complex
    right: np.ndarray
    left: np.ndarray = None
    index: int = 0
    residual: float = float("nan")
    sector: int = None

    @property
    def trace(self):
        return complex(np.trace(self.right))


@dataclass
class Spectrum:
    pairs: list
    zero_tol: float
    norm1: float = float("nan")

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    @property
    def values(self):
        return np.array([p.value for p in self.pairs])

    @property
    def lambda1(self):
        if len(self.pairs) < 2:
            raise ValueError("the gap needs at least two eigenvalues")
        return self.pairs[1].value

    @property
    def gap(self):
        return abs(self.lambda1.real)

    def to_dict(self):
        return {
            "zero_tol": self.zero_tol,
            "norm1": self.norm1,
            "values": [[float(p.value.real), float(p.value.imag)] for p in self.pairs],
            "residuals": [float(p.residual) for p in self.pairs],
            "trace_abs": [abs(p.trace) for p in self.pairs],
            "sectors": [p.sector for p in self.pairs],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def to_csv(self):
        """Eigenvalue table with columns index, re, im, trace_abs, residual."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "re", "im", "trace_abs", "residual"])
        for p in self.pairs:
            w.writerow([p.index, f"{p.value.real:.15g}", f"{p.value.imag:.15g}",
                        f"{abs(p.trace):.6g}", f"{p.residual:.6g}"])
        return buf.getvalue()


@dataclass
class PhaseSplit:
    """Traceless Hermitian eigenmatrix written as ``weight * (plus - minus)``."""
    plus: np.ndarray
    minus: np.ndarray
    weight: float

    def swapped(self):
        return PhaseSplit(self.minus, self.plus, -self.weight)

    @property
    def mixture(self):
        return 0.5 * (self.plus + self.minus)


@dataclass
class JordanReport:
    algebraic: int
    geometric: int
    indeterminate: bool = False
    eigenvalue: complex = 0j
    singular_values: np.ndarray = field(default=None, repr=False)

    @property
    def defective(self):
        return self.algebraic > self.geometric


def default_zero_tol(sm):
    return ZERO_TOL_REL * max(1.0, sm.norm1())


def default_im_tol(sm):
    scale = sm.model.rate_scale if getattr(sm, "model", None) is not None else 1.0
    return IM_TOL_REL * scale


def fix_phase(rho, herm_tol=1e-6):
    """Unit-norm representative of ``rho`` with a reproducible global phase.

    If some global phase makes ``rho`` Hermitian (to ``herm_tol``) that phase is used and
    the result is symmetrized; the sign is chosen so that the largest-modulus diagonal
    entry (or, for zero diagonal, the largest entry) has positive real part.
    """
    r = np.asarray(rho, dtype=complex)
    r = r / ops.hs_norm(r)
    # if r = c*A with A Hermitian then Tr[r r] = c^2 ||A||^2
    t2 = np.sum(r * r.T)
    if abs(t2) > 1e-8:
        rot = r * np.exp(-0.5j * np.angle(t2))
        if ops.hs_norm(rot - rot.conj().T) <= herm_tol:
            r = 0.5 * (rot + rot.conj().T)
            r = r / ops.hs_norm(r)
            d = r.diagonal().real
            if np.max(np.abs(d)) > 1e-8:
                sign = np.sign(d[np.argmax(np.abs(d))])
            else:
                flat = r.reshape(-1)
                z = flat[np.argmax(np.abs(flat))]
                sign = np.sign(z.real) if abs(z.real) > 1e-12 else np.sign(z.imag)
            return r * (sign or 1.0)
    flat = r.reshape(-1)
    z = flat[np.argmax(np.abs(flat))]
    return r * (abs(z) / z)


def _make_pair(sm, lam, v, im_tol, left=None):
    rho = sm.lift(v)
    if abs(lam.imag) <= im_tol:
        rho = fix_phase(rho)
    else:
        rho = rho / ops.hs_norm(rho)
    vb = sm.restrict(rho)
    res = float(np.linalg.norm(sm.matvec(vb) - lam * vb))
    lop = None
    if left is not None:
        s = np.vdot(left, vb)
        if abs(s) > 0:
            lop = sm.lift(left / np.conj(s))
    return EigenPair(complex(lam), rho, lop, residual=res)


def sort_pairs(pairs, zero_tol, tie_tol=None):
    """Sort by |Re lambda|, ties (within ``tie_tol``) broken by (Im lambda, |lambda|).

    Among modes with |lambda| <= zero_tol the one with the largest trace is put first.
    """
    tie_tol = zero_tol if tie_tol is None else tie_tol
    ordered = sorted(pairs, key=lambda p: abs(p.value.real))
    groups = []
    for p in ordered:
        if groups and abs(p.value.real) - abs(groups[-1][0].value.real) <= tie_tol:
            groups[-1].append(p)
        else:
            groups.append([p])
    out = []
    for g in groups:
        out.extend(sorted(g, key=lambda p: (p.value.imag, abs(p.value))))
    zeros = [i for i, p in enumerate(out) if abs(p.value) <= zero_tol]
    if zeros:
        best = max(zeros, key=lambda i: abs(out[i].trace))
        out.insert(0, out.pop(best))
    for i, p in enumerate(out):
        p.index = i
    return out


def _project_traceless(sm, pairs, zero_tol, im_tol):
    """Remove the steady-state admixture from decaying modes.

    The trace is an exact left zero-eigenvector, so ``rho_i - Tr(rho_i) rho_0 / Tr(rho_0)``
    is the exact spectral projection; it matters when ``lambda_1`` is nearly degenerate
    with zero and the iterative eigenvectors mix.
    """
    if not pairs or abs(pairs[0].value) > zero_tol or abs(pairs[0].trace) == 0:
        return pairs
    rho0, t0 = pairs[0].right, pairs[0].trace
    for i, p in enumerate(pairs[1:], start=1):
        if abs(p.value) <= zero_tol or abs(p.trace) == 0:
            continue
        left = None if p.left is None else sm.restrict(p.left)
        q = _make_pair(sm, p.value, sm.restrict(p.right - (p.trace / t0) * rho0), im_tol, left)
        q.index, q.sector = p.index, p.sector
        pairs[i] = q
    return pairs


def full_spectrum(sm, left=True, zero_tol=None, im_tol=None, dense_limit=DENSE_LIMIT):
    """All eigenpairs of ``sm`` by dense diagonalization."""
    if sm.size > dense_limit:
        raise DimensionOverflowError(
            f"dense diagonalization of size {sm.size} exceeds {dense_limit}; "
            "use leading_spectrum")
    zero_tol = default_zero_tol(sm) if zero_tol is None else zero_tol
    im_tol = default_im_tol(sm) if im_tol is None else im_tol
    a = sm.dense()
    if left:
        w, vl, vr = la.eig(a, left=True, right=True)
    else:
        w, vr = la.eig(a)
        vl = None
    pairs = [_make_pair(sm, w[i], vr[:, i], im_tol, None if vl is None else vl[:, i])
             for i in range(len(w))]
    pairs = _project_traceless(sm, sort_pairs(pairs, zero_tol), zero_tol, im_tol)
    return Spectrum(pairs, zero_tol, sm.norm1())


def _factorize(matrix, shift, norm, retries):
    eye = sparse.identity(matrix.shape[0], dtype=complex, format="csc")
    step = 1e-8 * max(1.0, norm)
    tried = []
    for attempt in range(retries + 1):
        try:
            lu = spla.splu(sparse.csc_matrix(matrix - shift * eye))
            return lu, shift
        except RuntimeError as exc:
            tried.append((shift, str(exc)))
            # singular at the shift: step off the real axis, growing each time
            shift = shift + step * (10 ** attempt) * (1 + 0.5j)
    raise ConvergenceError("shift-invert factorization failed", {"attempts": tried})


def leading_spectrum(sm, k=6, shift=None, left=False, seed=42, tol=0.0, maxiter=None,
                     zero_tol=None, im_tol=None, residual_tol=1e-9, retries=3):
    """The ``k`` eigenpairs closest to ``shift`` by shift-invert Arnoldi, sorted by |Re|.

    ``shift`` defaults to a small positive real number (1e-6 ||L||_1) so that the
    factorization is regular while the zero mode stays the nearest eigenvalue. If the
    factorization is singular the shift is moved off the real axis and retried.
    Matrix-free superoperators fall back to plain Arnoldi on the largest real parts.
    """
    n = sm.size
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n - 1:
        spec = full_spectrum(sm, left=left, zero_tol=zero_tol, im_tol=im_tol)
        spec.pairs = spec.pairs[:k]
        return spec
    norm = sm.norm1()
    zero_tol = default_zero_tol(sm) if zero_tol is None else zero_tol
    im_tol = default_im_tol(sm) if im_tol is None else im_tol
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    diag = {"k": k, "size": n}
    try:
        if sm.is_explicit:
            shift = 1e-6 * max(1.0, norm) if shift is None else complex(shift)
            lu, shift = _factorize(sm.matrix, shift, norm, retries)
            diag["shift"] = shift
            opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
            w, v = spla.eigs(sm.matrix, k=k, sigma=shift, OPinv=opinv, which="LM", v0=v0,
                             tol=tol, maxiter=maxiter)
        else:
            w, v = spla.eigs(sm.as_linear_operator(), k=k, which="LR", v0=v0, tol=tol,
                             maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        diag["converged"] = len(exc.eigenvalues)
        raise ConvergenceError(f"Arnoldi did not converge: {exc}", diag) from exc
    lefts = [None] * k
    if left:
        lefts = _left_vectors(sm, w, shift, k, v0, tol, maxiter, retries)
    pairs = [_make_pair(sm, w[i], v[:, i], im_tol, lefts[i]) for i in range(k)]
    worst = max(p.residual for p in pairs)
    if worst > residual_tol * max(1.0, norm):
        diag["residuals"] = [p.residual for p in pairs]
        raise ConvergenceError(f"eigenpair residual {worst:.3e} exceeds tolerance", diag)
    pairs = _project_traceless(sm, sort_pairs(pairs, zero_tol), zero_tol, im_tol)
    return Spectrum(pairs, zero_tol, norm)


def _left_vectors(sm, w, shift, k, v0, tol, maxiter, retries):
    if not sm.is_explicit:
        return [None] * k
    adj = sm.matrix.conj().T.tocsc()
    lu, s = _factorize(adj, np.conj(shift), sm.norm1(), retries)
    n = sm.size
    opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    mu, u = spla.eigs(adj, k=k, sigma=s, OPinv=opinv, which="LM", v0=v0.conj(), tol=tol,
                      maxiter=maxiter)
    out = []
    for lam in w:
        j = int(np.argmin(np.abs(np.conj(mu) - lam)))
        ok = abs(np.conj(mu[j]) - lam) <= 1e-6 * max(1.0, abs(lam))
        out.append(u[:, j] if ok else None)
    return out


def merge_spectra(spectra, zero_tol=None):
    """Union of spectra (e.g. from symmetry sectors), re-sorted."""
    pairs = [p for s in spectra for p in s.pairs]
    zero_tol = min(s.zero_tol for s in spectra) if zero_tol is None else zero_tol
    norm = max(s.norm1 for s in spectra)
    return Spectrum(sort_pairs(pairs, zero_tol), zero_tol, norm)


def _trace_row_index(t):
    return int(np.flatnonzero(np.abs(t) > 0.5)[0])


def steady_state(sm, spectrum=None, zero_tol=None, check=True, psd_floor=1e-10,
                 residual_tol=1e-10, k=3):
    """Unit-trace density matrix spanning the kernel of ``sm``.

    Solves ``L x = 0`` with one population row replaced by the trace condition.
    With ``check`` the kernel is verified to be one-dimensional (using ``spectrum`` if
    given) and a DegenerateKernelError carrying the kernel basis is raised otherwise.
    """
    zero_tol = default_zero_tol(sm) if zero_tol is None else zero_tol
    t = sm.trace_functional()
    if not np.any(np.abs(t) > 0.5):
        raise ValueError("this superoperator block contains no trace-carrying elements")
    if check:
        spec = spectrum if spectrum is not None else leading_spectrum(
            sm, k=min(k, sm.size - 1), zero_tol=zero_tol)
        zeros = [p for p in spec.pairs if abs(p.value) <= zero_tol]
        if len(zeros) > 1:
            raise DegenerateKernelError(
                f"{len(zeros)} eigenvalues within {zero_tol:.2e} of zero",
                kernel=[p.right for p in zeros], values=[p.value for p in zeros])
    norm = sm.norm1()
    if sm.is_explicit:
        r = _trace_row_index(t)
        a = sm.matrix.tocsr()
        a = sparse.vstack([a[:r], sparse.csr_matrix(t.reshape(1, -1)), a[r + 1:]]).tocsc()
        b = np.zeros(sm.size, dtype=complex)
        b[r] = 1.0
        lu = spla.splu(a)
        x = lu.solve(b)
        for _ in range(2):
            x = x + lu.solve(b - a @ x)
    else:
        spec = leading_spectrum(sm, k=min(k, sm.size - 1), zero_tol=zero_tol)
        x = sm.restrict(spec.pairs[0].right)
    x = x / (t @ x)
    res = float(np.linalg.norm(sm.matvec(x)))
    rho = sm.lift(x)
    if res > residual_tol * max(1.0, norm):
        raise ConvergenceError(f"steady-state residual {res:.3e} too large", {"residual": res})
    return clip_density_matrix(rho, psd_floor)


def clip_density_matrix(rho, floor=1e-10):
    """Hermitize, clip eigenvalues in [-floor, 0) to zero and renormalize the trace."""
    rho = 0.5 * (rho + rho.conj().T)
    w, u = la.eigh(rho)
    if w[0] < -floor:
        raise InvalidStateError(f"density matrix has eigenvalue {w[0]:.3e} below -{floor:g}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        rho = (u * w) @ u.conj().T
        rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def liouvillian_gap(x, k=6, **kwargs):
    """Return ``(|Re lambda_1|, Im lambda_1)`` from a Spectrum or a SuperMatrix."""
    spec = x if isinstance(x, Spectrum) else leading_spectrum(x, k=k, **kwargs)
    lam = spec.lambda1
    return abs(lam.real), lam.imag


def hermitian_split(pair, im_tol=1e-8, herm_tol=1e-8, trace_tol=1e-8):
    """Split a real-eigenvalue, traceless, Hermitian eigenmatrix into two density matrices."""
    lam = complex(pair.value)
    if abs(lam.imag) > im_tol:
        raise SplitUndefinedError(
            f"eigenvalue {lam} is complex; combine the conjugate pair with hermitize() first")
    r = np.asarray(pair.right, dtype=complex)
    if ops.hs_norm(r - r.conj().T) > herm_tol * ops.hs_norm(r):
        raise SplitUndefinedError("eigenmatrix is not Hermitian; phase-fix it first")
    if abs(np.trace(r)) > trace_tol * ops.hs_norm(r):
        raise SplitUndefinedError("eigenmatrix has nonzero trace (steady-state mode?)")
    p, u = la.eigh(0.5 * (r + r.conj().T))
    pos = np.where(p > 0, p, 0.0)
    neg = np.where(p < 0, -p, 0.0)
    wp, wm = pos.sum(), neg.sum()
    if wp == 0 or wm == 0:
        raise SplitUndefinedError("eigenmatrix is semidefinite; no split exists")
    plus = (u * (pos / wp)) @ u.conj().T
    minus = (u * (neg / wm)) @ u.conj().T
    return PhaseSplit(plus, minus, 0.5 * (wp + wm))


def hermitize(p, p_conj, tol=1e-6):
    """Hermitian combinations ``rho + rho^+`` and ``i(rho - rho^+)``, each unit-normalized.

    A component that vanishes (self-conjugate real mode) is returned as ``None``.
    """
    if abs(p_conj.value - np.conj(p.value)) > tol * max(1.0, abs(p.value)):
        raise PairingError(f"{p_conj.value} is not the conjugate of {p.value}")
    r = np.asarray(p.right, dtype=complex)
    rd = r.conj().T
    overlap = ops.hs_inner(rd, p_conj.right) / (ops.hs_norm(rd) * ops.hs_norm(p_conj.right))
    if abs(abs(overlap) - 1) > tol:
        raise PairingError("eigenmatrices are not Hermitian conjugates up to a phase")
    out = []
    for c in (r + rd, 1j * (r - rd)):
        n = ops.hs_norm(c)
        out.append(None if n <= tol * ops.hs_norm(r) else 0.5 * (c + c.conj().T) / n)
    return tuple(out)


def detect_jordan(sm, lam, tol=JORDAN_RANK_TOL, cluster_radius=None, dense_limit=DENSE_LIMIT):
    """Algebraic and geometric multiplicity of the eigenvalue cluster around ``lam``."""
    if sm.size > dense_limit:
        raise DimensionOverflowError(f"Jordan detection is dense; size {sm.size} too large")
    a = sm.dense()
    w = la.eigvals(a)
    radius = 1e-5 * max(1.0, sm.norm1()) if cluster_radius is None else cluster_radius
    near = np.abs(w - lam) <= radius
    if not near.any():
        raise ValueError(f"no eigenvalue within {radius:.2e} of {lam}")
    center = w[near].mean()
    s = la.svdvals(a - center * np.eye(a.shape[0]))
    thresh = tol * s[0]
    geometric = int(np.sum(s <= thresh))
    indeterminate = bool(np.any((s > thresh / 10) & (s < thresh * 10)))
    return JordanReport(int(near.sum()), geometric, indeterminate, complex(center), s)
