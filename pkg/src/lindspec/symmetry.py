"""Weak symmetries ``U = V . V^+`` of a Liouvillian and the induced sector blocks."""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy import sparse

from . import operators as ops
from . import spectra
from .errors import IncompleteKernelError, PairingError, SymmetryError


@dataclass
class SymmetrySuperOp:
    """Superoperator ``rho -> V rho V^+`` with ``V^n`` proportional to the identity.

    ``labels[i]`` is the sector index ``j`` (eigenvalue ``exp(2 pi i j / n)``) of the
    i-th element of the symmetry-adapted operator basis: ``|m><l|`` itself when
    ``basis`` is None, otherwise ``W|m><l|W^+`` with ``W`` the eigenvectors of ``V``.
    """
    v: np.ndarray
    order: int
    labels: np.ndarray
    basis: np.ndarray = None

    @property
    def dim(self):
        return self.v.shape[0]

    def z(self, j):
        return np.exp(2j * np.pi * j / self.order)

    @property
    def eigen_sectors(self):
        return {self.z(j): np.flatnonzero(self.labels == j) for j in range(self.order)}

    def sector_indices(self, j):
        return np.flatnonzero(self.labels == j % self.order)

    def apply(self, rho, power=1):
        out = ops.dense(rho)
        v = ops.dense(self.v)
        for _ in range(power % self.order if power >= 0 else 0):
            out = v @ out @ v.conj().T
        return out

    def apply_inverse(self, rho):
        v = ops.dense(self.v)
        return v.conj().T @ ops.dense(rho) @ v

    def superop(self):
        v = sparse.csr_matrix(self.v)
        return sparse.kron(v, v.conj()).tocsc()

    def sector_of(self, rho, tol=1e-8):
        """Sector index ``j`` with ``U rho = z_j rho``, or None if ``rho`` is mixed."""
        u = self.apply(rho)
        n = ops.hs_norm(rho)
        for j in range(self.order):
            if ops.hs_norm(u - self.z(j) * ops.dense(rho)) <= tol * n:
                return j
        return None


def number_parity_symmetry(dim, n=2):
    """``V = exp(2 pi i a^+a / n)``; ``|m><l|`` lies in sector ``(m - l) mod n``."""
    dim = ops.check_dim(dim)
    if int(n) != n or n < 2:
        raise ValueError(f"symmetry order must be an integer >= 2, got {n}")
    m = np.arange(dim)
    v = sparse.diags(np.exp(2j * np.pi * m / n), 0, format="csr")
    labels = ((m[:, None] - m[None, :]) % n).reshape(-1)
    return SymmetrySuperOp(v, int(n), labels)


def symmetry_from_unitary(v, n, tol=1e-10):
    """Generic Z_n symmetry for an arbitrary unitary ``v`` (sector labels found numerically)."""
    v = ops.dense(v)
    d = v.shape[0]
    if np.linalg.norm(v @ v.conj().T - np.eye(d)) > tol * np.sqrt(d):
        raise SymmetryError("V is not unitary")
    # complex Schur form of a normal matrix is diagonal with unitary vectors
    t, w = la.schur(v, output="complex")
    phases = np.diag(t)
    rel = phases[:, None] * phases[None, :].conj()
    k = np.angle(rel) * n / (2 * np.pi)
    kr = np.round(k)
    if np.max(np.abs(k - kr)) > 1e-6:
        raise SymmetryError(f"V^{n} is not proportional to the identity")
    labels = (kr.astype(int) % n).reshape(-1)
    if np.allclose(w, np.diag(np.diag(w))) and np.allclose(np.abs(np.diag(w)), 1):
        w = None
    return SymmetrySuperOp(v, int(n), labels, w)


def identity_symmetry(dim):
    d = ops.check_dim(dim)
    return SymmetrySuperOp(sparse.identity(d, dtype=complex, format="csr"), 1,
                           np.zeros(d * d, dtype=int))


def check_symmetry(sm, sym, tol=1e-10, probes=None, seed=0):
    """True iff ``||U^-1 L U - L|| <= tol ||L||``.

    Explicit supermatrices are compared entrywise (1-norm); with ``probes`` set, or for
    matrix-free operators, the check uses that many random probe vectors instead.
    """
    if sm.dim != sym.dim or sm.embed is not None:
        raise ValueError("symmetry check needs the full-space Liouvillian of matching size")
    scale = max(sm.norm1(), np.finfo(float).tiny)
    if sm.is_explicit and not probes:
        u = sym.superop()
        diff = u.conj().T @ sm.matrix @ u - sm.matrix
        return float(sparse.linalg.norm(diff, 1)) <= tol * scale
    rng = np.random.default_rng(seed)
    d = sm.dim
    for _ in range(probes or 5):
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        lhs = sym.apply_inverse(sm.lift(sm.matvec(ops.vectorize(sym.apply(x)))))
        rhs = sm.lift(sm.matvec(ops.vectorize(x)))
        if ops.hs_norm(lhs - rhs) > tol * scale * ops.hs_norm(x):
            return False
    return True


@dataclass
class Sector:
    j: int
    z: complex
    indices: np.ndarray
    block: object


@dataclass
class SectorDecomposition:
    sectors: list
    symmetry: SymmetrySuperOp

    @property
    def sizes(self):
        return {s.j: len(s.indices) for s in self.sectors}

    def sector(self, j):
        for s in self.sectors:
            if s.j == j % self.symmetry.order:
                return s
        raise KeyError(j)

    def _label(self, spec, j):
        for p in spec.pairs:
            p.sector = j
        return spec

    def full_spectrum(self, **kwargs):
        parts = [self._label(spectra.full_spectrum(s.block, **kwargs), s.j)
                 for s in self.sectors]
        return spectra.merge_spectra(parts)

    def leading_spectra(self, k=6, workers=1, sectors=None, **kwargs):
        """Per-sector leading spectra ``{j: Spectrum}``; sectors are solved independently."""
        chosen = [s for s in self.sectors if sectors is None or s.j in sectors]

        def solve(s):
            kk = min(k, s.block.size)
            return s.j, self._label(spectra.leading_spectrum(s.block, k=kk, **kwargs), s.j)

        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return dict(pool.map(solve, chosen))
        return dict(map(solve, chosen))

    def leading_spectrum(self, k=6, workers=1, **kwargs):
        return spectra.merge_spectra(list(self.leading_spectra(k, workers, **kwargs).values()))

    def steady_state(self, **kwargs):
        return spectra.steady_state(self.sector(0).block, **kwargs)

    def summary(self, k=4, **kwargs):
        leading = self.leading_spectra(k=k, **kwargs)
        return {
            "order": self.symmetry.order,
            "sectors": [{
                "j": s.j,
                "z": [float(s.z.real), float(s.z.imag)],
                "size": int(len(s.indices)),
                "leading": [[float(p.value.real), float(p.value.imag)]
                            for p in leading[s.j].pairs],
            } for s in self.sectors],
        }

    def summary_json(self, k=4, **kwargs):
        return json.dumps(self.summary(k, **kwargs), indent=2)


def sector_decompose(sm, sym, check=True, tol=1e-10):
    """Split an explicit full-space Liouvillian into its symmetry-sector blocks."""
    if check and not check_symmetry(sm, sym, tol):
        raise SymmetryError("the Liouvillian does not commute with this symmetry")
    if not sm.is_explicit:
        raise ValueError("sector decomposition needs an explicit supermatrix")
    sectors = []
    if sym.basis is not None:
        w = sym.basis
        t = np.kron(w, w.conj())
        full = sm.matrix
    for j in range(sym.order):
        idx = sym.sector_indices(j)
        if len(idx) == 0:
            continue
        if sym.basis is None:
            block = sm.block(idx)
        else:
            q = t[:, idx]
            mat = sparse.csc_matrix(q.conj().T @ (full @ q))
            block = type(sm)(sm.dim, matrix=mat, embed=q, model=sm.model)
        sectors.append(Sector(j, sym.z(j), idx, block))
    return SectorDecomposition(sectors, sym)


def prepare_sector_modes(modes, sym, threshold=1e-6, tol=1e-8):
    """Normalize one kernel mode per sector for the symmetry-broken construction.

    Returns ``[rho_0, ..., rho_{n-1}]`` with ``Tr rho_0 = 1``, ``rho_{n-j} = rho_j^+`` and
    unit HS norm for ``j != 0``. ``modes`` are EigenPairs with ``sector`` set.
    """
    n = sym.order
    by_sector = {}
    for p in modes:
        if p.sector is None:
            raise IncompleteKernelError("every mode needs a sector label")
        if abs(p.value.real) > threshold:
            raise IncompleteKernelError(
                f"mode in sector {p.sector} has |Re lambda| = {abs(p.value.real):.3e} "
                f"above the metastability threshold {threshold:g}")
        if p.sector in by_sector:
            raise IncompleteKernelError(f"two modes given for sector {p.sector}")
        by_sector[p.sector % n] = p
    missing = [j for j in range(n) if j not in by_sector]
    if missing:
        raise IncompleteKernelError(f"no kernel mode for sectors {missing}")
    out = [None] * n
    for j, p in by_sector.items():
        r = ops.dense(p.right)
        if ops.hs_norm(sym.apply(r) - sym.z(j) * r) > tol * ops.hs_norm(r):
            raise SymmetryError(f"mode labelled {j} is not in that sector")
    r0 = ops.dense(by_sector[0].right)
    tr = np.trace(r0)
    if abs(tr) < tol * ops.hs_norm(r0):
        raise IncompleteKernelError("the z=1 mode has zero trace")
    out[0] = r0 / tr
    for j in range(1, n):
        if out[j] is not None:
            continue
        r = ops.dense(by_sector[j].right)
        if 2 * j == n:
            r = spectra.fix_phase(r)
            if ops.hs_norm(r - r.conj().T) > tol:
                raise SymmetryError(f"self-conjugate sector {j} mode is not Hermitian")
            out[j] = 0.5 * (r + r.conj().T)
            continue
        r = spectra.fix_phase(r)
        partner = ops.dense(by_sector[n - j].right)
        ov = ops.hs_inner(r.conj().T, partner) / ops.hs_norm(partner)
        if abs(abs(ov) - 1) > 1e-6:
            raise PairingError(f"sector {n - j} mode is not the adjoint of sector {j} mode")
        out[j] = r
        out[n - j] = r.conj().T
    return out


def _lowest(h):
    return la.eigvalsh(0.5 * (h + h.conj().T))[0]


def symmetry_broken_basis(modes, sym, threshold=1e-6, scale=None, floor=1e-10):
    """Density matrices ``rho~_l = sum_j z_j^l c_j rho_j`` cyclically permuted by ``U``.

    The common weight ``c_j = scale`` of the non-invariant modes defaults to the largest
    value keeping ``rho~_0`` positive semidefinite, which makes the basis states extremal.
    """
    prepared = prepare_sector_modes(modes, sym, threshold)
    n = sym.order
    rest = sum(prepared[1:])
    if scale is None:
        if _lowest(prepared[0]) < -floor:
            raise SymmetryError("reference mode is not positive semidefinite")
        lo, hi = 0.0, 1.0
        while _lowest(prepared[0] + hi * rest) >= -floor:
            lo, hi = hi, 2 * hi
            if hi > 1e12:
                raise SymmetryError("non-invariant modes vanish; basis is degenerate")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _lowest(prepared[0] + mid * rest) >= -floor:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * hi:
                break
        scale = lo
    states = []
    for l in range(n):
        s = prepared[0] + scale * sum(sym.z(j) ** l * prepared[j] for j in range(1, n))
        if ops.hs_norm(s - s.conj().T) > 1e-8:
            raise SymmetryError(f"basis state {l} is not Hermitian; modes are ill-conditioned")
        states.append(0.5 * (s + s.conj().T))
    return states


def invert_broken_basis(states, sym):
    """Recover ``c_k rho_k = sum_l (z_k^*)^l rho~_l / n`` for every sector ``k``."""
    n = sym.order
    return [sum(np.conj(sym.z(k)) ** l * states[l] for l in range(n)) / n for k in range(n)]
