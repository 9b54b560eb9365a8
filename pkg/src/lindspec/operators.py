"""Operator algebra on truncated Hilbert spaces.

Operators are plain ``numpy`` arrays or ``scipy.sparse`` CSR matrices. Vectorization
is row-stacking: element ``(m, n)`` of a ``D x D`` operator lands at index ``m*D + n``,
so that ``vec(A X B) = kron(A, B.T) @ vec(X)``.
"""
import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import InvalidDimensionError, ShapeError

# operators with a smaller fill fraction are stored sparse
SPARSE_DENSITY = 0.25


def check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"Hilbert dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


def as_operator(a):
    """Return ``a`` as a complex square operator, sparse if its fill is below 25%."""
    if sparse.issparse(a):
        a = sparse.csr_matrix(a, dtype=complex)
        nnz_frac = a.nnz / max(1, a.shape[0] * a.shape[1])
    else:
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2:
            raise ShapeError(f"operator must be 2-d, got shape {a.shape}")
        nnz_frac = np.count_nonzero(a) / max(1, a.size)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"operator must be square, got shape {a.shape}")
    data = a.data if sparse.issparse(a) else a
    if not np.all(np.isfinite(data)):
        raise ValueError("operator has non-finite entries")
    if nnz_frac < SPARSE_DENSITY:
        return sparse.csr_matrix(a)
    return a.toarray() if sparse.issparse(a) else a


def dense(a):
    return a.toarray() if sparse.issparse(a) else np.asarray(a, dtype=complex)


def dag(a):
    return a.conj().T.tocsr() if sparse.issparse(a) else np.conj(a).T


def identity(dim):
    return sparse.identity(check_dim(dim), dtype=complex, format="csr")


def destroy(dim):
    """Bosonic annihilation operator on the Fock basis ``|0>..|dim-1>``."""
    dim = check_dim(dim)
    return as_operator(sparse.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1,
                                    shape=(dim, dim), dtype=complex))


def create(dim):
    return dag(destroy(dim))


def number(dim):
    dim = check_dim(dim)
    return as_operator(sparse.diags(np.arange(dim, dtype=complex), 0, shape=(dim, dim)))


def sigma_minus():
    """Lowering operator with ``|0>`` the excited (sigma_z = +1) state."""
    return np.array([[0, 0], [1, 0]], dtype=complex)


def sigma_x():
    return np.array([[0, 1], [1, 0]], dtype=complex)


def sigma_y():
    return np.array([[0, -1j], [1j, 0]], dtype=complex)


def sigma_z():
    return np.array([[1, 0], [0, -1]], dtype=complex)


def vectorize(a):
    a = dense(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square operator, got shape {a.shape}")
    return a.reshape(-1)


def unvectorize(v, dim=None):
    v = np.asarray(v)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if v.size != dim * dim:
        raise ShapeError(f"vector of length {v.size} cannot be unvectorized to {dim}x{dim}")
    return v.reshape(dim, dim)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")


def hs_inner(a, b):
    """Hilbert-Schmidt inner product Tr[A^dagger B]."""
    _same_shape(a, b)
    if sparse.issparse(a) or sparse.issparse(b):
        a = sparse.csr_matrix(a)
        return complex(a.conj().multiply(b).sum())
    return complex(np.vdot(np.asarray(a), np.asarray(b)))


def hs_norm(a):
    if sparse.issparse(a):
        return float(spla.norm(a))
    return float(np.linalg.norm(np.asarray(a)))


def is_hermitian(a, tol=1e-12):
    """True if ``||A - A^dagger|| <= tol * ||A||``."""
    scale = hs_norm(a)
    return hs_norm(a - dag(a)) <= tol * max(scale, np.finfo(float).tiny)


def basis_projector(dim, n):
    p = np.zeros((dim, dim), dtype=complex)
    p[n, n] = 1.0
    return p
