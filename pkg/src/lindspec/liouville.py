"""Liouvillian superoperators, explicit (sparse CSC) or matrix-free.

The supermatrix acts on row-stacked vectors::

    L = -i (H (x) 1 - 1 (x) H^T)
        + sum_k rate_k/2 (2 G_k (x) G_k^* - G_k^+ G_k (x) 1 - 1 (x) (G_k^+ G_k)^T)

which is ``vec`` of ``-i[H, rho] + sum_k rate_k/2 (2 G rho G^+ - G^+G rho - rho G^+G)``.
Note the ``rate/2`` prefactor multiplying a dissipator that carries a factor 2: a jump
``(a, gamma)`` damps the amplitude at ``gamma/2`` and the population at ``gamma``.
"""
import numpy as np
from scipy import io as spio
from scipy import sparse
from scipy.sparse import linalg as spla

from . import operators as ops
from .errors import DimensionOverflowError, ShapeError

# refuse explicit assembly above this many rows (D^2)
MAX_EXPLICIT = 250_000


class SuperMatrix:
    """A superoperator on (a subspace of) the row-stacked operator space.

    ``embed`` maps the ``size`` block coordinates into the full ``dim**2`` space:
    ``None`` for the full space, an integer index array for a coordinate subspace,
    or a dense isometry with orthonormal columns.
    """

    def __init__(self, dim, matrix=None, action=None, embed=None, model=None, adjoint=None):
        if matrix is None and action is None:
            raise ValueError("need an explicit matrix or a matrix-free action")
        self.dim = dim
        self.matrix = None if matrix is None else sparse.csc_matrix(matrix, dtype=complex)
        self._action = action
        self._adjoint = adjoint
        self.embed = embed
        self.model = model
        if self.matrix is not None:
            self.size = self.matrix.shape[0]
        elif embed is None:
            self.size = dim * dim
        else:
            self.size = embed.shape[1] if np.ndim(embed) == 2 else len(embed)
        self._norm1 = None

    @property
    def is_explicit(self):
        return self.matrix is not None

    @property
    def shape(self):
        return (self.size, self.size)

    def matvec(self, v):
        v = np.asarray(v, dtype=complex)
        if v.shape[0] != self.size:
            raise ShapeError(f"vector of length {v.shape[0]} for superoperator of size {self.size}")
        if self.matrix is not None:
            return self.matrix @ v
        return self._action(v)

    def rmatvec(self, v):
        """Action of the adjoint superoperator (Heisenberg picture)."""
        v = np.asarray(v, dtype=complex)
        if self.matrix is not None:
            return self.matrix.conj().T @ v
        if self._adjoint is None:
            raise ValueError("this matrix-free superoperator has no adjoint action")
        return self._adjoint(v)

    def as_linear_operator(self):
        return spla.LinearOperator(self.shape, matvec=lambda x: self.matvec(np.ravel(x)),
                                   rmatvec=lambda x: self.rmatvec(np.ravel(x)), dtype=complex)

    def norm1(self):
        """Induced 1-norm (exact when explicit, estimated otherwise)."""
        if self._norm1 is None:
            if self.matrix is not None:
                self._norm1 = float(spla.norm(self.matrix, 1))
            else:
                self._norm1 = float(spla.onenormest(self.as_linear_operator()))
        return self._norm1

    def lift(self, v):
        """Block-coordinate vector -> full ``dim x dim`` operator."""
        v = np.asarray(v)
        if self.embed is None:
            full = v
        elif np.ndim(self.embed) == 2:
            full = self.embed @ v
        else:
            full = np.zeros(self.dim * self.dim, dtype=complex)
            full[self.embed] = v
        return ops.unvectorize(full, self.dim)

    def restrict(self, op):
        """Full operator -> block coordinates (orthogonal projection)."""
        full = ops.vectorize(op)
        if self.embed is None:
            return full
        if np.ndim(self.embed) == 2:
            return self.embed.conj().T @ full
        return full[self.embed]

    def trace_functional(self):
        """Row vector ``t`` with ``t @ v == Tr[lift(v)]``."""
        return self.restrict(np.eye(self.dim)).conj()

    def dense(self):
        if self.matrix is not None:
            return self.matrix.toarray()
        return np.column_stack([self.matvec(e) for e in np.eye(self.size, dtype=complex)])

    def block(self, index):
        """Restriction to a coordinate subset of this (explicit, unembedded) superoperator."""
        if self.matrix is None or self.embed is not None:
            raise ValueError("blocks are taken from explicit full-space supermatrices")
        index = np.asarray(index)
        m = self.matrix[index][:, index]
        return SuperMatrix(self.dim, matrix=m, embed=index, model=self.model)


def lindblad_rhs(model, rho):
    """Right-hand side of the master equation evaluated directly on an operator."""
    rho = ops.dense(rho)
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for g, rate in model.jumps:
        if rate == 0:
            continue
        gd = ops.dag(g)
        gdg = gd @ g
        out = out + (rate / 2) * (2 * (g @ rho @ gd) - gdg @ rho - rho @ gdg)
    return np.asarray(out)


def lindblad_adjoint(model, x):
    """Adjoint generator ``i[H, X] + sum_k rate_k/2 (2 G^+ X G - G^+G X - X G^+G)``."""
    x = ops.dense(x)
    h = model.hamiltonian
    out = 1j * (h @ x - x @ h)
    for g, rate in model.jumps:
        if rate == 0:
            continue
        gd = ops.dag(g)
        gdg = gd @ g
        out = out + (rate / 2) * (2 * (gd @ x @ g) - gdg @ x - x @ gdg)
    return np.asarray(out)


def supermatrix(model):
    """Explicit sparse supermatrix of the model's Liouvillian."""
    d = model.dim
    eye = sparse.identity(d, dtype=complex, format="csr")
    h = sparse.csr_matrix(model.hamiltonian)
    out = -1j * (sparse.kron(h, eye) - sparse.kron(eye, h.T))
    for g, rate in model.jumps:
        if rate == 0:
            continue
        g = sparse.csr_matrix(g)
        gdg = g.conj().T @ g
        out = out + (rate / 2) * (2 * sparse.kron(g, g.conj())
                                  - sparse.kron(gdg, eye) - sparse.kron(eye, gdg.T))
    return sparse.csc_matrix(out)


def build_liouvillian(model, explicit=None, max_explicit=MAX_EXPLICIT):
    """Liouvillian of ``model``.

    ``explicit=None`` assembles the supermatrix when ``dim**2 <= max_explicit`` and
    falls back to the matrix-free action otherwise; ``explicit=True`` raises instead.
    """
    d = model.dim

    def action(v):
        return ops.vectorize(lindblad_rhs(model, ops.unvectorize(v, d)))

    def adjoint(v):
        return ops.vectorize(lindblad_adjoint(model, ops.unvectorize(v, d)))

    if explicit is False:
        return SuperMatrix(d, action=action, model=model, adjoint=adjoint)
    if d * d > max_explicit:
        if explicit:
            raise DimensionOverflowError(
                f"explicit supermatrix of size {d * d} exceeds limit {max_explicit}")
        return SuperMatrix(d, action=action, model=model, adjoint=adjoint)
    return SuperMatrix(d, matrix=supermatrix(model), action=action, model=model)


def apply_liouvillian(sm, rho):
    """Return L(rho) as an operator of the full space."""
    rho = ops.dense(rho)
    if rho.shape != (sm.dim, sm.dim):
        raise ShapeError(f"operator of shape {rho.shape} for Hilbert dimension {sm.dim}")
    return sm.lift(sm.matvec(sm.restrict(rho)))


def export_matrix_market(sm, path):
    if not sm.is_explicit:
        raise ValueError("only explicit supermatrices can be exported")
    spio.mmwrite(str(path), sm.matrix.tocoo(), comment="lindspec Liouvillian, row-stacked vec")
