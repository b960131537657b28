"""Complex Hermitian <-> real symmetric embedding helpers."""

from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def check_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {H.shape}")
    if H.size and np.max(np.abs(H - H.conj().T)) > tol:
        raise ValidationError("matrix is not Hermitian within tolerance")
    return H


def embed_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return the real symmetric 2n x 2n matrix [[Re H, -Im H], [Im H, Re H]].

    The spectrum of the embedding is the spectrum of ``H`` with every
    eigenvalue repeated twice, so ``H >= 0`` iff the embedding is PSD.
    """
    H = check_hermitian(H, tol)
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def embed_stack(H: np.ndarray) -> np.ndarray:
    """Embed a stack ``(..., n, n)`` of Hermitian matrices without validation."""
    re, im = H.real, H.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def unembed(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_hermitian`, averaging the redundant blocks."""
    S = np.asarray(S, dtype=float)
    n = S.shape[-1] // 2
    a, b = S[..., :n, :n], S[..., :n, n:]
    c, d = S[..., n:, :n], S[..., n:, n:]
    H = 0.5 * (a + d) + 0.5j * (c - b)
    return hermitianize(H)


def hermitianize(H: np.ndarray) -> np.ndarray:
    return 0.5 * (H + np.swapaxes(H, -1, -2).conj())


def hermitian_basis(n: int) -> np.ndarray:
    """Real coordinate basis of n x n Hermitian matrices, shape (n*n, n, n).

    Ordering: diagonal entries, then (Re, Im) of each strictly upper entry
    in row-major order. ``X = sum_j x_j E_j`` for coordinates ``x``.
    """
    basis = np.zeros((n * n, n, n), dtype=complex)
    for i in range(n):
        basis[i, i, i] = 1.0
    k = n
    for i in range(n):
        for j in range(i + 1, n):
            basis[k, i, j] = basis[k, j, i] = 1.0
            basis[k + 1, i, j] = 1j
            basis[k + 1, j, i] = -1j
            k += 2
    return basis


def hermitian_coords(C: np.ndarray) -> np.ndarray:
    """Coefficients ``a`` such that ``Re Tr(C X) = a @ x`` in the basis above."""
    n = C.shape[0]
    out = np.empty(n * n)
    out[:n] = np.real(np.diag(C))
    k = n
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = 2.0 * C[i, j].real
            out[k + 1] = 2.0 * C[i, j].imag
            k += 2
    return out


def psd_min_eig(H: np.ndarray) -> float:
    if H.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(hermitianize(np.asarray(H)))[0])
