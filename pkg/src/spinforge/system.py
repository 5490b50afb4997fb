"""Physical model of the electron-nitrogen two-qutrit register.

Both spins are spin-1.  The static Hamiltonian in frequency units (Hz) is

    H = D Sz^2 + ge Bz Sz + ge Bperp Sx + Q Iz^2 + gn Bz Iz + gn Bperp Ix
        + hyperfine(Axx Sx Ix + Ayy Sy Iy + Azz Sz Iz)

on the 9-dimensional product space, basis ordered (m_s, m_I) with
m = +1, 0, -1 per spin and the electron as the left tensor factor.

Sign convention: parameters store the conventional reporting values
(gn = -307.7 Hz/G, hyperfine magnitudes positive).  With gn negative, the
measured line positions require the hyperfine tensor to enter the Hamiltonian
with the opposite sign, so the builder applies the coupling as
``-(Axx Sx Ix + Ayy Sy Iy + Azz Sz Iz)``.  Only this combination places the
nitrogen qubit transition (m_I: 0 <-> -1 at m_s = -1) at its observed
~7.12 MHz and the 0 <-> +1 transition at ~2.78 MHz.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np
import scipy.optimize

from .config import NUMERICS
from .spinalg import eig_hermitian, kron

__all__ = [
    "SPIN1_X",
    "SPIN1_Y",
    "SPIN1_Z",
    "SystemParams",
    "LevelFrequencies",
    "QubitEncoding",
    "ENCODING",
    "REFERENCE_FREQUENCIES",
    "build_hamiltonian",
    "labeled_levels",
    "level_frequencies",
    "fit_params_from_frequencies",
]

_SQ2 = 1.0 / np.sqrt(2.0)
SPIN1_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) * _SQ2
SPIN1_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) * _SQ2
SPIN1_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)
_I3 = np.eye(3, dtype=complex)

#: basis index -> magnetic quantum number, for each spin
M_OF_INDEX = (1, 0, -1)
INDEX_OF_M = {1: 0, 0: 1, -1: 2}


@dataclasses.dataclass(frozen=True)
class SystemParams:
    """Static couplings of the two-spin register.

    Units: Hz for frequencies and couplings, Hz/G for gyromagnetic ratios,
    Gauss for fields.
    """

    d: float = 2.873668e9        # electron zero-field splitting
    q: float = -4.949156e6       # nitrogen quadrupole
    gamma_e: float = 2.8024e6    # Hz/G
    gamma_n: float = -307.7      # Hz/G
    bz: float = 62.291           # G, along the defect axis
    bperp: float = 0.0           # G, transverse misalignment
    axx: float = 2.679e6         # perpendicular hyperfine (magnitude)
    ayy: float = 2.679e6
    azz: float = 2.188218e6      # parallel hyperfine (magnitude)

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.q >= 0:
            raise ValueError("q must be negative")
        if self.bz < 0 or self.bperp < 0:
            raise ValueError("fields must be nonnegative")
        if self.axx != 0 and abs(self.axx - self.ayy) / abs(self.axx) >= 0.01:
            raise ValueError("perpendicular hyperfine must be axially symmetric")

    @property
    def aperp(self) -> float:
        return 0.5 * (self.axx + self.ayy)

    def replace(self, **kw) -> "SystemParams":
        return dataclasses.replace(self, **kw)

    def to_json(self) -> str:
        return json.dumps(
            {
                "D_Hz": self.d,
                "Q_Hz": self.q,
                "gamma_e_Hz_per_G": self.gamma_e,
                "gamma_n_Hz_per_G": self.gamma_n,
                "Bz_G": self.bz,
                "Bperp_G": self.bperp,
                "Axx_Hz": self.axx,
                "Ayy_Hz": self.ayy,
                "Azz_Hz": self.azz,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SystemParams":
        doc = json.loads(text)
        return cls(
            d=doc["D_Hz"],
            q=doc["Q_Hz"],
            gamma_e=doc.get("gamma_e_Hz_per_G", 2.8024e6),
            gamma_n=doc.get("gamma_n_Hz_per_G", -307.7),
            bz=doc["Bz_G"],
            bperp=doc.get("Bperp_G", 0.0),
            axx=doc["Axx_Hz"],
            ayy=doc["Ayy_Hz"],
            azz=doc["Azz_Hz"],
        )


@dataclasses.dataclass(frozen=True)
class QubitEncoding:
    """Maps the two-qubit computational basis into the 9-dim product space.

    Electron: m_s = 0 -> |0>, m_s = -1 -> |1>.  Nitrogen: m_I = 0 -> |0>,
    m_I = -1 -> |1>.  Product index = 3 * electron_index + nitrogen_index.
    """

    electron_levels: tuple[int, int] = (0, -1)
    nitrogen_levels: tuple[int, int] = (0, -1)

    @property
    def indices(self) -> tuple[int, int, int, int]:
        """Product-space indices of |00>, |01>, |10>, |11>."""
        out = []
        for ms in self.electron_levels:
            for mi in self.nitrogen_levels:
                out.append(3 * INDEX_OF_M[ms] + INDEX_OF_M[mi])
        idx = tuple(out)
        if len(set(idx)) != 4 or not all(0 <= i <= 8 for i in idx):
            raise ValueError("encoding indices must be four distinct values in 0..8")
        return idx


ENCODING = QubitEncoding()


def build_hamiltonian(params: SystemParams) -> np.ndarray:
    """9x9 static Hamiltonian in Hz; Hermitian by construction."""
    p = params
    h = (
        p.d * kron(SPIN1_Z @ SPIN1_Z, _I3)
        + p.gamma_e * p.bz * kron(SPIN1_Z, _I3)
        + p.gamma_e * p.bperp * kron(SPIN1_X, _I3)
        + p.q * kron(_I3, SPIN1_Z @ SPIN1_Z)
        + p.gamma_n * p.bz * kron(_I3, SPIN1_Z)
        + p.gamma_n * p.bperp * kron(_I3, SPIN1_X)
        - p.axx * kron(SPIN1_X, SPIN1_X)
        - p.ayy * kron(SPIN1_Y, SPIN1_Y)
        - p.azz * kron(SPIN1_Z, SPIN1_Z)
    )
    return 0.5 * (h + h.conj().T)


def labeled_levels(params: SystemParams) -> tuple[dict[tuple[int, int], float], np.ndarray, list[tuple[int, int]]]:
    """Exact eigenlevels labeled by (m_s, m_I) via maximum overlap.

    Returns (energies by label, eigenvector matrix with columns ordered to
    match the bare product basis, labels by column).  Raises when any
    eigenvector cannot be assigned to a bare level with squared overlap
    above the configured threshold.
    """
    h = build_hamiltonian(params)
    w, v = eig_hermitian(h)
    # greedy assignment: each eigenvector claims its dominant bare state
    order = np.full(9, -1, dtype=int)
    taken = set()
    weights = np.abs(v) ** 2
    for k in np.argsort(-weights.max(axis=0)):
        ranked = np.argsort(-weights[:, k])
        for idx in ranked:
            if idx not in taken:
                if weights[idx, k] <= NUMERICS.label_overlap_min:
                    raise ValueError(
                        "level labeling failed: eigenvector overlap below threshold"
                    )
                order[idx] = k
                taken.add(idx)
                break
    energies: dict[tuple[int, int], float] = {}
    cols = np.empty_like(v)
    labels: list[tuple[int, int]] = []
    for idx in range(9):
        k = order[idx]
        ms = M_OF_INDEX[idx // 3]
        mi = M_OF_INDEX[idx % 3]
        energies[(ms, mi)] = w[k]
        # fix the gauge so the dominant amplitude is real positive
        phase = v[idx, k] / abs(v[idx, k])
        cols[:, idx] = v[:, k] / phase
        labels.append((ms, mi))
    return energies, cols, labels


@dataclasses.dataclass(frozen=True)
class LevelFrequencies:
    """Six transition frequencies (Hz), positive magnitudes.

    Nitrogen transitions are named by the conventional line labels; note the
    electron line ``we_at_ni_m1`` is the hyperfine line shifted *up* by
    |Azz| from the m_I = 0 line.
    """

    wn_m1_at_es_m1: float   # nitrogen 0 <-> -1, electron in m_s = -1 (~7.12 MHz)
    wn_p1_at_es_m1: float   # nitrogen 0 <-> +1, electron in m_s = -1 (~2.78 MHz)
    wn_p1_at_es_0: float    # nitrogen 0 <-> +1, electron in m_s = 0  (~4.97 MHz)
    wn_m1_at_es_0: float    # nitrogen 0 <-> -1, electron in m_s = 0  (~4.93 MHz)
    we_at_ni_m1: float      # electron 0 <-> -1 on the +|Azz| hyperfine line (~2.7013 GHz)
    we_at_ni_0: float       # electron 0 <-> -1 at m_I = 0 (~2.6991 GHz)

    def __post_init__(self):
        for f in dataclasses.astuple(self):
            if f <= 0:
                raise ValueError("frequencies must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(dataclasses.astuple(self))


#: Reference line set of the characterized device.  The m_I = 0 electron line
#: is recomputed from the level model: the tabulated 2.699101 GHz disagrees
#: with its own fitted parameters by ~10 kHz (single-digit slip; the
#: closed-form parameter round trip pins ~2.699111 GHz), and the value here
#: is the one consistent under exact diagonalization with the other five
#: lines (see README, "Reference device data").
REFERENCE_FREQUENCIES = LevelFrequencies(
    wn_m1_at_es_m1=7.120706e6,
    wn_p1_at_es_m1=2.780105e6,
    wn_p1_at_es_0=4.965825e6,
    wn_m1_at_es_0=4.927491e6,
    we_at_ni_m1=2.701294e9,
    we_at_ni_0=2.699108280e9,
)

#: Parameter set that reproduces REFERENCE_FREQUENCIES under exact
#: diagonalization (frozen output of the exact-method fit).  The individual
#: values differ from the conventional tabulation because that tabulation is
#: consistent only with the first-order closed forms; all simulations that
#: must land on the measured lines use this set.
REFERENCE_PARAMS = SystemParams(
    d=2875024496.983628,
    q=-4949113.4648877755,
    bz=62.7760869856971,
    bperp=0.0,
    axx=2647148.8001282397,
    ayy=2647148.8001282397,
    azz=2188317.2759882407,
)


def _exact_frequencies(params: SystemParams) -> LevelFrequencies:
    e, _, _ = labeled_levels(params)
    return LevelFrequencies(
        wn_m1_at_es_m1=abs(e[(-1, -1)] - e[(-1, 0)]),
        wn_p1_at_es_m1=abs(e[(-1, 1)] - e[(-1, 0)]),
        wn_p1_at_es_0=abs(e[(0, 1)] - e[(0, 0)]),
        wn_m1_at_es_0=abs(e[(0, -1)] - e[(0, 0)]),
        we_at_ni_m1=abs(e[(-1, 1)] - e[(0, 1)]),
        we_at_ni_0=abs(e[(-1, 0)] - e[(0, 0)]),
    )


def _perturbative_frequencies(params: SystemParams) -> LevelFrequencies:
    p = params
    gnbz = p.gamma_n * p.bz
    eps = p.aperp**2 / p.d
    return LevelFrequencies(
        wn_m1_at_es_m1=-p.q + gnbz + p.azz + eps,
        wn_p1_at_es_m1=-p.q - gnbz - p.azz,
        wn_p1_at_es_0=-p.q - gnbz - eps,
        wn_m1_at_es_0=-p.q + gnbz - eps,
        we_at_ni_m1=p.d - p.gamma_e * p.bz + p.azz + eps,
        we_at_ni_0=p.d - p.gamma_e * p.bz + 3 * eps,
    )


def level_frequencies(params: SystemParams, method: str = "exact") -> LevelFrequencies:
    """Six transition frequencies, by exact diagonalization or the
    first-order closed forms (perturbation in Aperp and Bperp)."""
    if method == "exact":
        return _exact_frequencies(params)
    if method == "perturbative":
        return _perturbative_frequencies(params)
    raise ValueError(f"unknown method {method!r}")


def fit_params_from_frequencies(
    freqs: LevelFrequencies,
    gamma_e: float = 2.8024e6,
    gamma_n: float = -307.7,
    sigmas: LevelFrequencies | None = None,
    method: str = "perturbative",
) -> SystemParams:
    """Invert the six measured lines for (D, Bz, Q, Azz, Aperp).

    The perturbative method solves the linearized closed forms by (weighted)
    least squares with u = Aperp^2 / D as the fifth linear unknown; six
    equations over five unknowns, so inconsistent inputs are averaged.  The
    exact method refines that solution against full diagonalization.  A
    negative u signals inputs inconsistent with the level structure.
    """
    s2, s3, s4, s5, s6, s7 = freqs.as_array()
    w = np.ones(6) if sigmas is None else 1.0 / sigmas.as_array()
    # The four nitrogen lines determine (Bz, Q, Azz, u = Aperp^2/D) exactly;
    # the two electron lines are reconciled by weighted mean for D - ge*Bz.
    bz = (s5 - s4) / (2.0 * gamma_n)
    u = ((s2 + s3) - (s4 + s5)) / 3.0
    q = -(s4 + s5) / 2.0 - u
    azz = (s2 - s3) / 2.0 - gamma_n * bz - u / 2.0
    c6 = s6 - azz - u
    c7 = s7 - 3.0 * u
    d = (w[4] ** 2 * c6 + w[5] ** 2 * c7) / (w[4] ** 2 + w[5] ** 2) + gamma_e * bz
    if u < -1e-12 * abs(d):
        raise ValueError("inconsistent frequencies: negative value under the Aperp root")
    aperp = float(np.sqrt(max(u, 0.0) * d))
    params = SystemParams(
        d=float(d), q=float(q), gamma_e=gamma_e, gamma_n=gamma_n,
        bz=float(bz), bperp=0.0, axx=aperp, ayy=aperp, azz=float(azz),
    )
    if method == "perturbative":
        return params
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    y = freqs.as_array()

    def residual(x):
        d_, q_, bz_, azz_, ap_ = x
        trial = SystemParams(
            d=d_, q=q_, gamma_e=gamma_e, gamma_n=gamma_n,
            bz=bz_, bperp=0.0, axx=ap_, ayy=ap_, azz=azz_,
        )
        return (_exact_frequencies(trial).as_array() - y) * w

    x0 = np.array([params.d, params.q, params.bz, params.azz, params.aperp])
    res = scipy.optimize.least_squares(residual, x0, method="lm", xtol=1e-15, ftol=1e-15)
    d_, q_, bz_, azz_, ap_ = res.x
    return SystemParams(
        d=float(d_), q=float(q_), gamma_e=gamma_e, gamma_n=gamma_n,
        bz=float(bz_), bperp=0.0, axx=float(ap_), ayy=float(ap_), azz=float(azz_),
    )
