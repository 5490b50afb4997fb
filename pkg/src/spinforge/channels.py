"""Quantum channel mathematics in the Pauli transfer matrix representation.

A PTM is the real d^2 x d^2 matrix (P)_ij = Tr(sigma_i Lambda(sigma_j)) / d
over the unnormalized Pauli strings, ordered I, X, Y, Z per qubit with the
electron as the left (most significant) factor.  Channels on the two-qutrit
space are compressed to the computational qubit subspace with explicit
leakage bookkeeping before any PTM is formed.
"""

from __future__ import annotations

import dataclasses
import json
from functools import lru_cache

import numpy as np
import scipy.linalg

from .config import NUMERICS
from .system import ENCODING, INDEX_OF_M, QubitEncoding

__all__ = [
    "PAULI_1Q",
    "pauli_basis",
    "pauli_labels",
    "PTM",
    "LeakageReport",
    "ErrorGenerator",
    "ptm_of_unitary",
    "channel_from_propagator",
    "avg_gate_fidelity",
    "error_generator",
    "fidelity_split",
    "cptp_check",
    "CPTPReport",
    "depolarizing_ptm",
    "dephasing_ptm",
    "rotation_ptm",
    "elementary_generators",
]

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_1Q = (_I, _X, _Y, _Z)
_PAULI_NAMES = "IXYZ"


@lru_cache(maxsize=None)
def pauli_basis(n_qubits: int) -> tuple[np.ndarray, ...]:
    """Unnormalized Pauli strings, electron (left factor) most significant."""
    if n_qubits == 1:
        return PAULI_1Q
    smaller = pauli_basis(n_qubits - 1)
    return tuple(np.kron(p, q) for p in PAULI_1Q for q in smaller)


@lru_cache(maxsize=None)
def pauli_labels(n_qubits: int) -> tuple[str, ...]:
    if n_qubits == 1:
        return tuple(_PAULI_NAMES)
    smaller = pauli_labels(n_qubits - 1)
    return tuple(a + b for a in _PAULI_NAMES for b in smaller)


@dataclasses.dataclass(frozen=True)
class PTM:
    """Pauli transfer matrix of an n-qubit channel."""

    matrix: np.ndarray
    n_qubits: int

    def __post_init__(self):
        d2 = 4**self.n_qubits
        if self.matrix.shape != (d2, d2):
            raise ValueError("PTM dimension does not match qubit count")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def compose(self, other: "PTM") -> "PTM":
        """Channel self applied after other."""
        if self.n_qubits != other.n_qubits:
            raise ValueError("dimension mismatch")
        return PTM(self.matrix @ other.matrix, self.n_qubits)

    def apply(self, pauli_vec: np.ndarray) -> np.ndarray:
        return self.matrix @ pauli_vec

    def is_trace_preserving(self, tol: float | None = None) -> bool:
        tol = NUMERICS.ptm_tp_tol if tol is None else tol
        first = np.zeros(self.matrix.shape[0])
        first[0] = 1.0
        return np.abs(self.matrix[0] - first).max() < tol

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis": list(pauli_labels(self.n_qubits)),
                "qubit_order": "electron_left",
                "matrix": self.matrix.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PTM":
        doc = json.loads(text)
        m = np.asarray(doc["matrix"], dtype=float)
        n = {4: 1, 16: 2}[m.shape[0]]
        return cls(m, n)

    @classmethod
    def identity(cls, n_qubits: int) -> "PTM":
        return cls(np.eye(4**n_qubits), n_qubits)


@dataclasses.dataclass(frozen=True)
class LeakageReport:
    """Population lost from the computational subspace."""

    worst_case: float
    per_basis_state: tuple[float, ...]

    def __post_init__(self):
        vals = (self.worst_case, *self.per_basis_state)
        if any(p < -1e-9 or p > 1 + 1e-9 for p in vals):
            raise ValueError("leakage probabilities must lie in [0, 1]")


def density_to_pauli_vec(rho: np.ndarray) -> np.ndarray:
    n = {2: 1, 4: 2}[rho.shape[0]]
    basis = pauli_basis(n)
    return np.array([np.trace(p @ rho).real for p in basis])


def pauli_vec_to_density(vec: np.ndarray) -> np.ndarray:
    n = {4: 1, 16: 2}[vec.size]
    basis = pauli_basis(n)
    d = 2**n
    return sum(c * p for c, p in zip(vec, basis)) / d


def ptm_of_unitary(u: np.ndarray) -> PTM:
    """PTM of rho -> U rho U^dag for a 2x2 or 4x4 unitary."""
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    if np.abs(u.conj().T @ u - np.eye(d)).max() > NUMERICS.unitary_tol * 10:
        raise ValueError("ptm_of_unitary requires a unitary input")
    n = {2: 1, 4: 2}[d]
    basis = pauli_basis(n)
    ud = u.conj().T
    m = np.empty((d * d, d * d))
    for j, pj in enumerate(basis):
        img = u @ pj @ ud
        for i, pi in enumerate(basis):
            m[i, j] = np.trace(pi @ img).real / d
    return PTM(m, n)


def ptm_of_kraus(kraus: list[np.ndarray], n_qubits: int, renormalize: bool = False) -> PTM:
    """PTM of rho -> sum_k K rho K^dag (possibly trace-decreasing)."""
    basis = pauli_basis(n_qubits)
    d = 2**n_qubits
    m = np.zeros((d * d, d * d))
    for j, pj in enumerate(basis):
        img = sum(k @ pj @ k.conj().T for k in kraus)
        for i, pi in enumerate(basis):
            m[i, j] = np.trace(pi @ img).real / d
    if renormalize and abs(m[0, 0]) > 1e-15:
        m = m / m[0, 0]
    return PTM(m, n_qubits)


def channel_from_propagator(
    prop: np.ndarray,
    encoding: QubitEncoding = ENCODING,
    max_leakage: float | None = None,
) -> tuple[PTM, LeakageReport]:
    """Compress a 9-dim propagator to the two-qubit computational subspace.

    ``prop`` is either a 9x9 unitary or an 81x81 superoperator (row-major
    vec convention).  The restricted map is completely positive but in
    general trace-decreasing; the returned PTM is of the trace-renormalized
    map (renormalization factor = mean retained trace, recorded implicitly in
    the leakage report).  Raises when worst-case leakage invalidates the
    subspace picture.
    """
    idx = np.array(encoding.indices)
    if prop.shape == (9, 9):
        k = prop[np.ix_(idx, idx)]
        ktk = k.conj().T @ k
        per_basis = tuple(1.0 - np.real(ktk[i, i]) for i in range(4))
        worst = float(1.0 - np.linalg.eigvalsh(ktk).min())
        ptm = ptm_of_kraus([k], 2, renormalize=True)
    elif prop.shape == (81, 81):
        sub = prop.reshape(9, 9, 9, 9)[np.ix_(idx, idx, idx, idx)].reshape(16, 16)
        basis = pauli_basis(2)
        m = np.zeros((16, 16))
        for j, pj in enumerate(basis):
            img = (sub @ pj.reshape(-1)).reshape(4, 4)
            for i, pi in enumerate(basis):
                m[i, j] = np.trace(pi @ img).real / 4
        per_basis = []
        for i in range(4):
            rho = np.zeros((4, 4), dtype=complex)
            rho[i, i] = 1.0
            out = (sub @ rho.reshape(-1)).reshape(4, 4)
            per_basis.append(float(1.0 - np.trace(out).real))
        per_basis = tuple(per_basis)
        worst = float(max(max(per_basis), 0.0))
        if abs(m[0, 0]) > 1e-15:
            m = m / m[0, 0]
        ptm = PTM(m, 2)
    else:
        raise ValueError("propagator must be 9x9 or 81x81")
    limit = NUMERICS.leakage_max if max_leakage is None else max_leakage
    report = LeakageReport(worst_case=max(worst, 0.0), per_basis_state=per_basis)
    if report.worst_case > limit:
        raise ValueError(
            f"leakage {report.worst_case:.3g} exceeds {limit:.3g}: "
            "subspace channel is not meaningful"
        )
    return ptm, report


def avg_gate_fidelity(p_exp: PTM, p_target: PTM) -> float:
    """Average gate fidelity from the PTM overlap."""
    if p_exp.n_qubits != p_target.n_qubits:
        raise ValueError("dimension mismatch")
    d = p_exp.dim
    tr = np.trace(p_exp.matrix.T @ p_target.matrix)
    return float((tr / d + 1) / (d + 1))


# ---------------------------------------------------------------------------
# error generators
# ---------------------------------------------------------------------------


def _superop_in_pauli_basis(left: np.ndarray, right: np.ndarray, n: int) -> np.ndarray:
    """Pauli-basis matrix of rho -> left @ rho @ right (complex in general)."""
    basis = pauli_basis(n)
    d = 2**n
    m = np.empty((d * d, d * d), dtype=complex)
    for j, pj in enumerate(basis):
        img = left @ pj @ right
        for i, pi in enumerate(basis):
            m[i, j] = np.trace(pi @ img) / d
    return m


@lru_cache(maxsize=None)
def elementary_generators(n_qubits: int):
    """Elementary error generators in PTM space.

    Returns (labels, matrices) for the Hamiltonian (H), stochastic (S),
    correlation (C) and active (A) families.  Normalized so a coherent
    z-rotation by angle eps has h_Z = eps and exp(gamma * S_Z) is dephasing
    with s_Z = gamma.
    """
    n = n_qubits
    basis = pauli_basis(n)
    labels_p = pauli_labels(n)
    eye = basis[0]
    d2 = 4**n
    labels: list[tuple[str, str]] = []
    mats: list[np.ndarray] = []

    def push(fam: str, lab: str, m: np.ndarray) -> None:
        if np.abs(m.imag).max() > 1e-12:
            raise AssertionError(f"generator {fam}[{lab}] is not real in the Pauli basis")
        labels.append((fam, lab))
        mats.append(np.ascontiguousarray(m.real))

    # H_P: rho -> -(i/2)[P, rho], so exp(eps * H_P) = PTM(exp(-i eps P / 2))
    for k in range(1, d2):
        p = basis[k]
        push("H", labels_p[k], -0.5j * (_c(p, eye, n) - _c(eye, p, n)))
    # S_P: rho -> P rho P - rho
    for k in range(1, d2):
        p = basis[k]
        push("S", labels_p[k], _c(p, p, n) - np.eye(d2))
    # C_{P,Q}: rho -> P rho Q + Q rho P - {{P,Q}/2, rho}
    # A_{P,Q}: rho -> i(P rho Q - Q rho P + {[P,Q]/2, rho})
    for a in range(1, d2):
        for b in range(a + 1, d2):
            p, q = basis[a], basis[b]
            anti = 0.5 * (p @ q + q @ p)
            comm = 0.5 * (p @ q - q @ p)
            mc = (
                _c(p, q, n) + _c(q, p, n)
                - (_cm(anti, n, left=True) + _cm(anti, n, left=False))
            )
            ma = 1j * (
                _c(p, q, n) - _c(q, p, n)
                + (_cm(comm, n, left=True) + _cm(comm, n, left=False))
            )
            push("C", f"{labels_p[a]},{labels_p[b]}", mc)
            push("A", f"{labels_p[a]},{labels_p[b]}", ma)
    stack = np.stack(mats)
    flat = stack.reshape(len(mats), -1)
    # dual (pseudo-inverse) frame for coefficient extraction
    pinv = np.linalg.pinv(flat.T)
    return tuple(labels), stack, pinv


def _c(left: np.ndarray, right: np.ndarray, n: int) -> np.ndarray:
    return _superop_in_pauli_basis(left, right, n).astype(complex)


def _cm(op: np.ndarray, n: int, left: bool) -> np.ndarray:
    eye = pauli_basis(n)[0]
    if left:
        return _superop_in_pauli_basis(op, eye, n).astype(complex)
    return _superop_in_pauli_basis(eye, op, n).astype(complex)


@dataclasses.dataclass(frozen=True)
class ErrorGenerator:
    """Logarithmic post-gate error with its elementary decomposition."""

    matrix: np.ndarray                     # L in PTM space
    n_qubits: int
    h_coeffs: dict[str, float]
    s_coeffs: dict[str, float]
    c_coeffs: dict[str, float]
    a_coeffs: dict[str, float]

    @property
    def hamiltonian_part(self) -> np.ndarray:
        labels, mats, _ = elementary_generators(self.n_qubits)
        out = np.zeros_like(self.matrix)
        for (fam, lab), m in zip(labels, mats):
            if fam == "H":
                out += self.h_coeffs[lab] * m
        return out

    def reconstruct(self) -> np.ndarray:
        labels, mats, _ = elementary_generators(self.n_qubits)
        coeff = {"H": self.h_coeffs, "S": self.s_coeffs,
                 "C": self.c_coeffs, "A": self.a_coeffs}
        out = np.zeros_like(self.matrix)
        for (fam, lab), m in zip(labels, mats):
            out += coeff[fam][lab] * m
        return out


def error_generator(g: PTM, g0: PTM) -> ErrorGenerator:
    """L = log(G G0^-1) with coefficients over the elementary generators."""
    if g.n_qubits != g0.n_qubits:
        raise ValueError("dimension mismatch")
    err = g.matrix @ np.linalg.inv(g0.matrix)
    ev = np.linalg.eigvals(err)
    if np.any((ev.real < 0) & (np.abs(ev.imag) < 1e-12)):
        raise ValueError("error map has an eigenvalue on the negative real axis; "
                         "principal logarithm undefined (error too large)")
    l = scipy.linalg.logm(err)
    if np.abs(l.imag).max() > 1e-8:
        raise ValueError("logarithm branch failure: error too large for the "
                         "small-error framework")
    l = l.real
    labels, _, pinv = elementary_generators(g.n_qubits)
    coeffs = pinv @ l.reshape(-1)
    fam_maps = {"H": {}, "S": {}, "C": {}, "A": {}}
    for (fam, lab), c in zip(labels, coeffs):
        fam_maps[fam][lab] = float(c)
    gen = ErrorGenerator(
        matrix=l, n_qubits=g.n_qubits,
        h_coeffs=fam_maps["H"], s_coeffs=fam_maps["S"],
        c_coeffs=fam_maps["C"], a_coeffs=fam_maps["A"],
    )
    if np.abs(gen.reconstruct() - l).max() > 1e-8 * max(1.0, np.abs(l).max()):
        raise ValueError("elementary-generator decomposition failed to close")
    return gen


def fidelity_split(err: ErrorGenerator, g0: PTM) -> tuple[float, float]:
    """(coherent, incoherent) infidelity from the H / non-H parts of L.

    Valid for small errors; warns via ValueError when the additive split
    misses the total infidelity by more than 10%.
    """
    lh = err.hamiltonian_part
    lrest = err.matrix - lh
    g_h = PTM(scipy.linalg.expm(lh) @ g0.matrix, g0.n_qubits)
    g_rest = PTM(scipy.linalg.expm(lrest) @ g0.matrix, g0.n_qubits)
    coherent = 1.0 - avg_gate_fidelity(g_h, g0)
    incoherent = 1.0 - avg_gate_fidelity(g_rest, g0)
    g_full = PTM(scipy.linalg.expm(err.matrix) @ g0.matrix, g0.n_qubits)
    total = 1.0 - avg_gate_fidelity(g_full, g0)
    if total > 1e-12 and abs((coherent + incoherent) - total) > 0.1 * total:
        raise ValueError("additivity residual exceeds 10% of the total "
                         "infidelity; error too large for the split")
    return coherent, incoherent


@dataclasses.dataclass(frozen=True)
class CPTPReport:
    is_tp: bool
    is_cp: bool
    choi_min_eigenvalue: float


def choi_matrix(p: PTM) -> np.ndarray:
    """Choi matrix normalized to unit trace for TP maps."""
    n = p.n_qubits
    d = 2**n
    basis = pauli_basis(n)
    j = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d * d):
        for b in range(d * d):
            j += p.matrix[a, b] * np.kron(basis[b].T, basis[a])
    return j / (d * d)


def cptp_check(p: PTM) -> CPTPReport:
    first = np.zeros(p.matrix.shape[0])
    first[0] = 1.0
    is_tp = bool(np.abs(p.matrix[0] - first).max() < NUMERICS.ptm_tp_tol)
    ev = np.linalg.eigvalsh(choi_matrix(p))
    return CPTPReport(
        is_tp=is_tp,
        is_cp=bool(ev.min() >= -NUMERICS.choi_cp_tol),
        choi_min_eigenvalue=float(ev.min()),
    )


def single_qubit_channel(
    prop: np.ndarray,
    which: str = "electron",
    spectator_index: int = 1,
    encoding: QubitEncoding = ENCODING,
    max_leakage: float | None = None,
) -> tuple[PTM, LeakageReport]:
    """One-qubit channel from a 9-dim unitary, tracing out the other spin.

    The spectator starts in the pure level ``spectator_index`` (0, 1 or 2 in
    the m = +1, 0, -1 ordering; default m = 0).  Kraus operators are indexed
    by the spectator's output level, i.e. the spectator is traced out.
    """
    if prop.shape != (9, 9):
        raise ValueError("single_qubit_channel expects a 9x9 unitary")
    if which == "electron":
        own_levels = [INDEX_OF_M[m] for m in encoding.electron_levels]
        def pair(o, s):
            return 3 * o + s
    elif which == "nitrogen":
        own_levels = [INDEX_OF_M[m] for m in encoding.nitrogen_levels]
        def pair(o, s):
            return 3 * s + o
    else:
        raise ValueError(f"unknown qubit {which!r}")
    kraus = []
    for spec_out in range(3):
        k = np.empty((2, 2), dtype=complex)
        for a, oa in enumerate(own_levels):
            for b, ob in enumerate(own_levels):
                k[a, b] = prop[pair(oa, spec_out), pair(ob, spectator_index)]
        kraus.append(k)
    total = sum(k.conj().T @ k for k in kraus)
    per_basis = tuple(float(1.0 - total[i, i].real) for i in range(2))
    worst = float(1.0 - np.linalg.eigvalsh(total).min())
    limit = NUMERICS.leakage_max if max_leakage is None else max_leakage
    report = LeakageReport(worst_case=max(worst, 0.0), per_basis_state=per_basis)
    if report.worst_case > limit:
        raise ValueError(
            f"leakage {report.worst_case:.3g} exceeds {limit:.3g}: "
            "subspace channel is not meaningful"
        )
    return ptm_of_kraus(kraus, 1, renormalize=True), report


# ---------------------------------------------------------------------------
# standard channels
# ---------------------------------------------------------------------------


def depolarizing_ptm(p: float, n_qubits: int) -> PTM:
    """PTM diag(1, p, ..., p): identity with probability-weight p on all
    non-identity Pauli components."""
    d2 = 4**n_qubits
    m = np.eye(d2) * p
    m[0, 0] = 1.0
    return PTM(m, n_qubits)


def dephasing_ptm(gamma: float, axis: str = "Z", n_qubits: int = 1) -> PTM:
    """exp(gamma * S_axis): pure stochastic error with s_axis = gamma."""
    labels, mats, _ = elementary_generators(n_qubits)
    for (fam, lab), m in zip(labels, mats):
        if fam == "S" and lab == axis:
            return PTM(scipy.linalg.expm(gamma * m), n_qubits)
    raise ValueError(f"unknown axis {axis!r}")


def rotation_ptm(eps: float, axis: str = "Z", n_qubits: int = 1) -> PTM:
    """exp(eps * H_axis): pure coherent error with h_axis = eps."""
    labels, mats, _ = elementary_generators(n_qubits)
    for (fam, lab), m in zip(labels, mats):
        if fam == "H" and lab == axis:
            return PTM(scipy.linalg.expm(eps * m), n_qubits)
    raise ValueError(f"unknown axis {axis!r}")
