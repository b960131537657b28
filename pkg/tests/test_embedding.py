from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secrecy_region.sdp import ValidationError, embed_hermitian, hermitianize, unembed
from secrecy_region.sdp.embedding import hermitian_basis, hermitian_coords


def random_hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return hermitianize(A)


def test_identity_embeds_to_identity():
    np.testing.assert_array_equal(embed_hermitian(np.eye(2)), np.eye(4))


def test_pauli_y_spectrum():
    Y = np.array([[0, 1j], [-1j, 0]])
    E = embed_hermitian(Y)
    np.testing.assert_allclose(E, E.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(E), [-1, -1, 1, 1], atol=1e-12)


def test_block_layout():
    H = np.array([[2.0, 1 + 3j], [1 - 3j, -1.0]])
    E = embed_hermitian(H)
    np.testing.assert_array_equal(E[:2, :2], H.real)
    np.testing.assert_array_equal(E[:2, 2:], -H.imag)
    np.testing.assert_array_equal(E[2:, :2], H.imag)
    np.testing.assert_array_equal(E[2:, 2:], H.real)


def test_eigenvalues_doubled_on_random_matrices():
    rng = np.random.default_rng(7)
    for _ in range(100):
        H = random_hermitian(rng, 3)
        direct = np.linalg.eigvalsh(H)
        doubled = np.sort(np.repeat(direct, 2))
        np.testing.assert_allclose(np.linalg.eigvalsh(embed_hermitian(H)), doubled, atol=1e-10)


def test_non_hermitian_rejected():
    with pytest.raises(ValidationError):
        embed_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        embed_hermitian(np.ones((2, 3)))


def test_roundtrip():
    rng = np.random.default_rng(1)
    H = random_hermitian(rng, 4)
    np.testing.assert_allclose(unembed(embed_hermitian(H)), H, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_coordinates_reproduce_trace_pairing(n, seed):
    rng = np.random.default_rng(seed)
    C = random_hermitian(rng, n)
    x = rng.normal(size=n * n)
    X = np.tensordot(x, hermitian_basis(n), axes=1)
    np.testing.assert_allclose(X, X.conj().T)
    assert np.isclose(hermitian_coords(C) @ x, np.real(np.trace(C @ X)))
