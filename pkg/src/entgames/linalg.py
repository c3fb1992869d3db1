"""Dense complex linear algebra kernels.

Everything operates on plain numpy arrays. States are 1-d complex vectors; a
bipartite state on C^d1 (x) C^d2 uses the row-major index convention
``(i, j) -> i * d2 + j``, matching ``numpy.kron``.
"""

from __future__ import annotations

import numpy as np
import numpy.linalg as npl

from .config import TOL
from .errors import DimensionMismatch, NotHermitian, NotPositiveSemidefinite

Array = np.ndarray


def _scale(m: Array) -> float:
    return max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0


def hermitize(m: Array, tol: float | None = None) -> Array:
    """Return the Hermitian part of m, erroring if m is not close to Hermitian."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    tol = TOL.hermitian if tol is None else tol
    dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if dev > tol * _scale(m):
        raise NotHermitian(f"deviation from Hermitian is {dev:.3e}")
    return (m + m.conj().T) / 2.0


def _sym(m: Array) -> Array:
    # cheap symmetrization for matrices Hermitian by construction
    return (m + m.conj().T) / 2.0


def kron(a: Array, b: Array) -> Array:
    """Kronecker product, row-major blocks of a scaled by b."""
    return np.kron(a, b)


def partial_trace(m: Array, d1: int, d2: int, keep: str) -> Array:
    """Trace out one factor of an operator on C^d1 (x) C^d2.

    keep="first" returns the d1 x d1 reduction, keep="second" the d2 x d2 one.
    """
    m = np.asarray(m)
    if m.shape != (d1 * d2, d1 * d2):
        raise DimensionMismatch(f"operator shape {m.shape}, expected {(d1 * d2, d1 * d2)}")
    t = m.reshape(d1, d2, d1, d2)
    if keep == "first":
        return np.einsum("ijkj->ik", t)
    if keep == "second":
        return np.einsum("ijil->jl", t)
    raise ValueError("keep must be 'first' or 'second'")


def eig_hermitian(m: Array, tol: float | None = None) -> tuple[Array, Array]:
    """Eigenvalues (ascending, real) and orthonormal eigenvector columns."""
    w, v = npl.eigh(hermitize(m, tol))
    return w, v


def clamp_spectrum(w: Array, clamp: float | None = None, hard: float | None = None) -> Array:
    """Zero small negative eigenvalues; error on meaningfully negative ones."""
    clamp = TOL.psd_clamp if clamp is None else clamp
    hard = TOL.psd_raise if hard is None else hard
    w = np.asarray(w, dtype=np.float64)
    lo = float(w.min()) if w.size else 0.0
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if lo < -hard * scale:
        raise NotPositiveSemidefinite(f"eigenvalue {lo:.3e} below -{hard:.1e}")
    return np.where(w < clamp, np.maximum(w, 0.0), w)


def psd_sqrt(m: Array) -> Array:
    """Positive square root of a PSD matrix."""
    w, v = eig_hermitian(m)
    w = clamp_spectrum(w)
    return _sym((v * np.sqrt(w)) @ v.conj().T)


def psd_power(m: Array, p: float) -> Array:
    """m**p for PSD m with p > 0, computed on the support."""
    w, v = eig_hermitian(m)
    w = clamp_spectrum(w)
    return _sym((v * w**p) @ v.conj().T)


def psd_pinv_sqrt(m: Array, rank_rel: float | None = None) -> Array:
    """Inverse square root on the support of a PSD matrix, zero on its kernel."""
    rank_rel = TOL.rank_rel if rank_rel is None else rank_rel
    w, v = eig_hermitian(m)
    w = clamp_spectrum(w)
    cutoff = rank_rel * float(w.max()) if w.size and w.max() > 0 else np.inf
    inv = np.where(w > cutoff, 1.0 / np.sqrt(np.where(w > cutoff, w, 1.0)), 0.0)
    return _sym((v * inv) @ v.conj().T)


def support_projector(m: Array, rank_rel: float | None = None) -> Array:
    """Orthogonal projector onto the range of a PSD matrix."""
    rank_rel = TOL.rank_rel if rank_rel is None else rank_rel
    w, v = eig_hermitian(m)
    w = clamp_spectrum(w)
    cutoff = rank_rel * float(w.max()) if w.size and w.max() > 0 else np.inf
    keep = w > cutoff
    vk = v[:, keep]
    return _sym(vk @ vk.conj().T)


def svd(m: Array) -> tuple[Array, Array, Array]:
    """Full SVD (U, s, V) with m = U diag(s) V* on the leading block, s descending."""
    u, s, vh = npl.svd(np.asarray(m, dtype=np.complex128))
    return u, s, vh.conj().T


def operator_norm(m: Array) -> float:
    """Largest singular value."""
    return float(npl.norm(m, 2))


def unit_vector(v: Array, tol: float | None = None) -> Array:
    """Check that v has norm 1 within tol and return it exactly renormalized."""
    tol = TOL.unit_norm if tol is None else tol
    v = np.asarray(v, dtype=np.complex128)
    n = float(npl.norm(v))
    if abs(n - 1.0) > tol:
        raise DimensionMismatch(f"vector norm {n} is not 1 within {tol:.1e}")
    return v / n


def schmidt(v: Array, d1: int, d2: int) -> tuple[Array, Array, Array]:
    """Schmidt decomposition of a bipartite vector.

    Returns (coeffs, left, right) with coeffs descending and nonnegative so
    that v = sum_k coeffs[k] * kron(left[:, k], right[:, k]).
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (d1 * d2,):
        raise DimensionMismatch(f"vector shape {v.shape}, expected ({d1 * d2},)")
    u, s, vh = npl.svd(v.reshape(d1, d2), full_matrices=False)
    return s, u, vh.T


def polar_unitary(m: Array) -> Array:
    """Unitary factor U of m with U m PSD (and m U* PSD), from the full SVD."""
    u, s, vh = npl.svd(np.asarray(m, dtype=np.complex128))
    return vh.conj().T @ u.conj().T


def random_unitary(d: int, rng: np.random.Generator) -> Array:
    """Haar-distributed d x d unitary."""
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = npl.qr(z)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_psd(d: int, rng: np.random.Generator, rank: int | None = None) -> Array:
    """Random PSD matrix W W* with Gaussian W of the given rank."""
    rank = d if rank is None else rank
    w = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    return _sym(w @ w.conj().T)
