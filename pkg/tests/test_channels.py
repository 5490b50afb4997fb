import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from spinforge.channels import (
    PTM,
    avg_gate_fidelity,
    channel_from_propagator,
    cptp_check,
    dephasing_ptm,
    depolarizing_ptm,
    elementary_generators,
    error_generator,
    fidelity_split,
    pauli_basis,
    pauli_labels,
    ptm_of_unitary,
    rotation_ptm,
)
from spinforge.system import ENCODING


def rx(theta):
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    return scipy.linalg.expm(-1j * theta / 2 * x)


def rz(theta):
    z = np.diag([1.0, -1.0]).astype(complex)
    return scipy.linalg.expm(-1j * theta / 2 * z)


SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def random_unitary(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_identity_ptm():
    p = ptm_of_unitary(np.eye(2))
    assert np.allclose(p.matrix, np.eye(4))


def test_rx_pi_2_bloch_action():
    p = ptm_of_unitary(rx(np.pi / 2)).matrix
    # X -> X, Y -> Z, Z -> -Y
    assert np.allclose(p[:, 1], [0, 1, 0, 0], atol=1e-12)
    assert np.allclose(p[:, 2], [0, 0, 0, 1], atol=1e-12)
    assert np.allclose(p[:, 3], [0, 0, -1, 0], atol=1e-12)


def test_swap_ptm_permutes_labels():
    p = ptm_of_unitary(SWAP).matrix
    labels = pauli_labels(2)
    for i, li in enumerate(labels):
        j = labels.index(li[::-1])
        col = np.zeros(16)
        col[j] = 1.0
        assert np.allclose(p[:, i], col, atol=1e-12)


def test_ptm_of_unitary_is_orthogonal():
    rng = np.random.default_rng(0)
    u = random_unitary(rng, 4)
    p = ptm_of_unitary(u).matrix
    assert np.allclose(p.T @ p, np.eye(16), atol=1e-10)
    assert np.linalg.det(p) == pytest.approx(1.0, abs=1e-9)


def test_avg_fidelity_identity():
    p = ptm_of_unitary(rx(0.7))
    assert avg_gate_fidelity(p, p) == pytest.approx(1.0, abs=1e-12)


def test_avg_fidelity_two_qubit_depolarizing():
    depol = depolarizing_ptm(0.0, 2)
    ident = PTM.identity(2)
    assert avg_gate_fidelity(depol, ident) == pytest.approx(0.25, abs=1e-12)


@given(st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_avg_fidelity_single_qubit_depolarizing(p):
    f = avg_gate_fidelity(depolarizing_ptm(p, 1), PTM.identity(1))
    assert f == pytest.approx((1 + p) / 2, abs=1e-12)
    r = (2**1 - 1) * (1 - p) / 2**1
    assert f == pytest.approx(1 - r, abs=1e-12)


@given(st.integers(0, 200))
@settings(max_examples=15, deadline=None)
def test_fidelity_basis_change_invariance(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, 2)
    v = random_unitary(rng, 2)
    w = random_unitary(rng, 2)
    f1 = avg_gate_fidelity(ptm_of_unitary(u @ v), ptm_of_unitary(v))
    f2 = avg_gate_fidelity(
        ptm_of_unitary(w @ u @ v @ w.conj().T), ptm_of_unitary(w @ v @ w.conj().T)
    )
    assert f1 == pytest.approx(f2, abs=1e-10)


def test_channel_from_identity_propagator():
    ptm, leak = channel_from_propagator(np.eye(9, dtype=complex), ENCODING)
    assert np.allclose(ptm.matrix, np.eye(16), atol=1e-12)
    assert leak.worst_case < 1e-12


def test_channel_from_block_unitary():
    rng = np.random.default_rng(42)
    u4 = random_unitary(rng, 4)
    big = np.eye(9, dtype=complex)
    idx = np.array(ENCODING.indices)
    big[np.ix_(idx, idx)] = u4
    ptm, leak = channel_from_propagator(big, ENCODING)
    assert leak.worst_case < 1e-12
    assert np.allclose(ptm.matrix, ptm_of_unitary(u4).matrix, atol=1e-10)


def test_channel_leakage_error():
    # unitary that rotates a computational level fully out of the subspace
    big = np.eye(9, dtype=complex)
    i_in, i_out = ENCODING.indices[0], 0
    big[i_in, i_in] = 0
    big[i_out, i_out] = 0
    big[i_out, i_in] = 1
    big[i_in, i_out] = 1
    with pytest.raises(ValueError):
        channel_from_propagator(big, ENCODING)


def test_superop_path_matches_unitary_path():
    from spinforge.spinalg import unitary_superop

    rng = np.random.default_rng(9)
    u4 = random_unitary(rng, 4)
    big = np.eye(9, dtype=complex)
    idx = np.array(ENCODING.indices)
    big[np.ix_(idx, idx)] = u4
    p1, _ = channel_from_propagator(big, ENCODING)
    p2, _ = channel_from_propagator(unitary_superop(big), ENCODING)
    assert np.allclose(p1.matrix, p2.matrix, atol=1e-10)


def test_elementary_generator_basis_is_complete():
    labels, mats, pinv = elementary_generators(1)
    assert len(labels) == 3 + 3 + 3 + 3
    flat = mats.reshape(len(labels), -1)
    assert np.linalg.matrix_rank(flat) == len(labels)
    # random TP generator (first row zero) decomposes exactly
    rng = np.random.default_rng(1)
    coeffs = rng.normal(size=len(labels))
    l = np.tensordot(coeffs, mats, axes=1)
    rec = pinv @ l.reshape(-1)
    assert np.allclose(rec, coeffs, atol=1e-10)


def test_elementary_generator_two_qubit_count():
    labels, mats, _ = elementary_generators(2)
    assert len(labels) == 15 + 15 + 105 + 105
    flat = mats.reshape(len(labels), -1)
    assert np.linalg.matrix_rank(flat) == 240


def test_error_generator_zero():
    g0 = ptm_of_unitary(rx(np.pi / 2))
    gen = error_generator(g0, g0)
    assert np.abs(gen.matrix).max() < 1e-12
    assert max(abs(v) for v in gen.h_coeffs.values()) < 1e-12
    assert max(abs(v) for v in gen.s_coeffs.values()) < 1e-12


def test_error_generator_coherent_injection():
    eps = 1e-3
    g0 = ptm_of_unitary(rx(np.pi / 2))
    g = PTM(rotation_ptm(eps, "Z").matrix @ g0.matrix, 1)
    gen = error_generator(g, g0)
    assert gen.h_coeffs["Z"] == pytest.approx(eps, rel=0.01)
    assert max(abs(v) for v in gen.s_coeffs.values()) < 1e-7


def test_error_generator_stochastic_injection():
    gamma = 1e-3
    g0 = ptm_of_unitary(rx(np.pi / 2))
    g = PTM(dephasing_ptm(gamma, "Z").matrix @ g0.matrix, 1)
    gen = error_generator(g, g0)
    assert gen.s_coeffs["Z"] == pytest.approx(gamma, rel=0.01)
    assert max(abs(v) for v in gen.h_coeffs.values()) < 1e-7


def test_rotation_convention_h_z_equals_angle():
    # PTM of e^{-i eps Z / 2} equals exp(eps * H_Z)
    eps = 0.02
    assert np.allclose(
        rotation_ptm(eps, "Z").matrix, ptm_of_unitary(rz(eps)).matrix, atol=1e-10
    )


@given(st.integers(0, 100))
@settings(max_examples=10, deadline=None)
def test_error_generator_round_trip(seed):
    rng = np.random.default_rng(seed)
    labels, mats, _ = elementary_generators(1)
    coeffs = rng.normal(size=len(labels)) * 1e-3
    l = np.tensordot(coeffs, mats, axes=1)
    g0 = ptm_of_unitary(rx(np.pi / 2))
    g = PTM(scipy.linalg.expm(l) @ g0.matrix, 1)
    gen = error_generator(g, g0)
    rebuilt = PTM(scipy.linalg.expm(gen.matrix) @ g0.matrix, 1)
    assert np.abs(rebuilt.matrix - g.matrix).max() < 1e-8


def test_fidelity_split_zero():
    g0 = ptm_of_unitary(rx(np.pi / 2))
    gen = error_generator(g0, g0)
    coh, inc = fidelity_split(gen, g0)
    assert abs(coh) < 1e-12 and abs(inc) < 1e-12


def test_fidelity_split_quadratic_vs_linear_scaling():
    g0 = ptm_of_unitary(rx(np.pi / 2))
    eps = 1e-3

    def coherent_part(e):
        g = PTM(rotation_ptm(e, "Z").matrix @ g0.matrix, 1)
        return fidelity_split(error_generator(g, g0), g0)[0]

    def incoherent_part(gam):
        g = PTM(dephasing_ptm(gam, "Z").matrix @ g0.matrix, 1)
        return fidelity_split(error_generator(g, g0), g0)[1]

    ratio_coh = coherent_part(2 * eps) / coherent_part(eps)
    ratio_inc = incoherent_part(2 * eps) / incoherent_part(eps)
    assert ratio_coh == pytest.approx(4.0, abs=0.1)
    assert ratio_inc == pytest.approx(2.0, abs=0.05)
    # pure coherent error leaves essentially no incoherent part
    g = PTM(rotation_ptm(eps, "Z").matrix @ g0.matrix, 1)
    assert fidelity_split(error_generator(g, g0), g0)[1] < 1e-10


def test_fidelity_split_additivity():
    g0 = ptm_of_unitary(rx(np.pi / 2))
    l = 1e-2
    g = PTM(
        rotation_ptm(l, "Z").matrix @ dephasing_ptm(l, "Y").matrix @ g0.matrix, 1
    )
    gen = error_generator(g, g0)
    coh, inc = fidelity_split(gen, g0)
    total = 1 - avg_gate_fidelity(g, g0)
    assert abs((coh + inc) - total) < 1e-3 * total


def test_cptp_check_unitary():
    rep = cptp_check(ptm_of_unitary(rx(1.1)))
    assert rep.is_tp and rep.is_cp
    assert rep.choi_min_eigenvalue > -1e-12


def test_cptp_check_transpose_map():
    # transpose map: Y -> -Y, canonical non-CP positive map
    p = PTM(np.diag([1.0, 1.0, -1.0, 1.0]), 1)
    rep = cptp_check(p)
    assert rep.is_tp
    assert not rep.is_cp
    assert rep.choi_min_eigenvalue == pytest.approx(-0.5, abs=1e-10)


def test_ptm_json_round_trip():
    p = ptm_of_unitary(SWAP)
    q = PTM.from_json(p.to_json())
    assert q.n_qubits == 2
    assert np.allclose(q.matrix, p.matrix)


def test_pauli_basis_ordering():
    labels = pauli_labels(2)
    assert labels[0] == "II" and labels[1] == "IX" and labels[4] == "XI"
    basis = pauli_basis(2)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.allclose(basis[4], np.kron(x, np.eye(2)))
