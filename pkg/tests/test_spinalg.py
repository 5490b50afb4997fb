import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinforge.spinalg import (
    eig_hermitian,
    expm,
    expm_hermitian_generator,
    is_hermitian,
    is_unitary,
    kron,
    lindblad_superop,
    superop_apply,
    unitary_superop,
    vec,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def random_hermitian(rng, d, norm=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = 0.5 * (a + a.conj().T)
    return h / max(np.abs(np.linalg.eigvalsh(h)).max(), 1e-12) * norm


def test_kron_identity():
    assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))


def test_kron_sigma_z_identity():
    assert np.allclose(kron(SZ, np.eye(2)), np.diag([1, 1, -1, -1]))


def test_kron_spin1_sz():
    sz1 = np.diag([1.0, 0.0, -1.0])
    expected = np.diag([1, 1, 1, 0, 0, 0, -1, -1, -1]).astype(float)
    assert np.allclose(kron(sz1, np.eye(3)), expected)


def test_expm_zero():
    assert np.allclose(expm(np.zeros((3, 3))), np.eye(3))


def test_expm_pi_sigma_x():
    u = expm(-1j * np.pi / 2 * SX)
    assert np.allclose(u, -1j * SX, atol=1e-12)


def test_expm_diagonal():
    a, b = 0.3, -1.2
    assert np.allclose(expm(np.diag([a, b]).astype(complex)), np.diag([np.exp(a), np.exp(b)]))


def test_expm_general_matches_scipy():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    import scipy.linalg

    assert np.allclose(expm(a), scipy.linalg.expm(a), atol=1e-11)


def test_expm_rejects_nonsquare():
    with pytest.raises(ValueError):
        expm(np.zeros((2, 3)))


@given(st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_expm_inverse_property(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 4, norm=10.0)
    u = expm(-1j * h)
    v = expm(1j * h)
    assert np.abs(u @ v - np.eye(4)).max() < 1e-10


def test_eig_permutation():
    w, v = eig_hermitian(np.diag([3.0, 1.0, 2.0]).astype(complex))
    assert np.allclose(w, [1, 2, 3])
    assert np.allclose(np.abs(v), np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]]))


def test_eig_sigma_x():
    w, v = eig_hermitian(SX)
    assert np.allclose(w, [-1, 1])
    for k in range(2):
        assert np.allclose(SX @ v[:, k], w[k] * v[:, k])


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


@given(st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_eig_reconstruction_property(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 6, norm=3.0)
    w, v = eig_hermitian(h)
    assert np.abs((v * w) @ v.conj().T - h).max() < 1e-10
    assert np.abs(v.conj().T @ v - np.eye(6)).max() < 1e-10


@given(st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_kron_mixed_product_property(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(4))
    lhs = kron(a, b) @ kron(c, d)
    rhs = kron(a @ c, b @ d)
    assert np.abs(lhs - rhs).max() < 1e-12 * max(1.0, np.abs(rhs).max())


def test_hermitian_generator_fast_path():
    rng = np.random.default_rng(3)
    h = random_hermitian(rng, 9, norm=5.0)
    u = expm_hermitian_generator(h, scale=-2j * np.pi * 1e-3)
    assert is_unitary(u)
    assert np.allclose(u, expm(-2j * np.pi * 1e-3 * h), atol=1e-11)


def test_flag_checks():
    assert is_hermitian(SZ)
    assert is_unitary(expm(-1j * 0.3 * SX))
    assert not is_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_unitary_superop_matches_conjugation():
    rng = np.random.default_rng(11)
    h = random_hermitian(rng, 3)
    u = expm(-1j * h)
    rho = random_hermitian(rng, 3)
    s = unitary_superop(u)
    assert np.allclose(superop_apply(s, rho), u @ rho @ u.conj().T)


def test_lindblad_pure_dephasing_rates():
    # single qubit, L = sqrt(rate) sigma_z: coherences decay at 2*rate
    rate = 0.17
    lv = lindblad_superop(np.zeros((2, 2)), [(rate, SZ)])
    import scipy.linalg

    prop = scipy.linalg.expm(lv * 1.0)
    rho = np.array([[0.5, 0.5], [0.5, 0.5]])
    out = superop_apply(prop, rho)
    assert np.allclose(out[0, 0], 0.5)
    assert np.allclose(out[0, 1], 0.5 * np.exp(-2 * rate))


def test_lindblad_zero_rate_is_unitary_conjugation():
    rng = np.random.default_rng(5)
    h = random_hermitian(rng, 3)
    lv = lindblad_superop(h, [(0.0, np.diag([1.0, 0, -1]).astype(complex))])
    import scipy.linalg

    s = scipy.linalg.expm(lv * 0.2)
    u = expm(-2j * np.pi * h * 0.2)
    assert np.abs(s - unitary_superop(u)).max() < 1e-8


def test_vec_convention_row_major():
    rho = np.arange(4).reshape(2, 2).astype(complex)
    assert np.allclose(vec(rho), [0, 1, 2, 3])
