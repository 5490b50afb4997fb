import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinforge.spinalg import is_hermitian
from spinforge.system import (
    ENCODING,
    REFERENCE_FREQUENCIES,
    REFERENCE_PARAMS,
    LevelFrequencies,
    SystemParams,
    build_hamiltonian,
    fit_params_from_frequencies,
    labeled_levels,
    level_frequencies,
)

# quoted 1-sigma uncertainties of the tabulated lines, Hz
LINE_SIGMAS = LevelFrequencies(1.0, 6.0, 3.0, 1.0, 1e3, 1e3)


def second_order_oracle(params: SystemParams) -> LevelFrequencies:
    """Independent second-order perturbation theory with exact denominators.

    Flip-flop coupling element Aperp between (m_s, m_I) and (m_s+1, m_I-1)
    pairs of the diagonal Hamiltonian, hyperfine entering with the sign
    conventions of the builder.  Only valid for bperp = 0.
    """
    assert params.bperp == 0.0
    p = params

    def e0(ms, mi):
        return (
            p.d * ms**2 + p.gamma_e * p.bz * ms
            + p.q * mi**2 + p.gamma_n * p.bz * mi - p.azz * ms * mi
        )

    pairs = {}
    for ms, mi in [(m, n) for m in (1, 0, -1) for n in (1, 0, -1)]:
        couplings = []
        if ms < 1 and mi > -1:
            couplings.append((ms + 1, mi - 1))
        if ms > -1 and mi < 1:
            couplings.append((ms - 1, mi + 1))
        pairs[(ms, mi)] = couplings

    def shifted(ms, mi):
        base = e0(ms, mi)
        corr = sum(
            p.aperp**2 / (e0(ms, mi) - e0(ms2, mi2))
            for ms2, mi2 in pairs[(ms, mi)]
        )
        return base + corr

    return LevelFrequencies(
        wn_m1_at_es_m1=abs(shifted(-1, -1) - shifted(-1, 0)),
        wn_p1_at_es_m1=abs(shifted(-1, 1) - shifted(-1, 0)),
        wn_p1_at_es_0=abs(shifted(0, 1) - shifted(0, 0)),
        wn_m1_at_es_0=abs(shifted(0, -1) - shifted(0, 0)),
        we_at_ni_m1=abs(shifted(-1, 1) - shifted(0, 1)),
        we_at_ni_0=abs(shifted(-1, 0) - shifted(0, 0)),
    )


def test_hamiltonian_is_hermitian_default():
    h = build_hamiltonian(SystemParams())
    assert is_hermitian(h)


def test_diagonal_limit_gap():
    p = SystemParams(bperp=0.0, axx=0.0, ayy=0.0)
    h = build_hamiltonian(p)
    assert np.abs(h - np.diag(np.diag(h))).max() < 1e-6
    i00 = 3 * 1 + 1   # |m_s=0, m_I=0>
    i10 = 3 * 2 + 1   # |m_s=-1, m_I=0>
    gap = (h[i10, i10] - h[i00, i00]).real
    assert gap == pytest.approx(p.d - p.gamma_e * p.bz, rel=1e-12)


def test_encoding_indices():
    assert ENCODING.indices == (4, 5, 7, 8)


def test_reference_params_reproduce_reference_lines():
    f = level_frequencies(REFERENCE_PARAMS, method="exact")
    ref = REFERENCE_FREQUENCIES
    assert abs(f.wn_m1_at_es_m1 - ref.wn_m1_at_es_m1) < 100.0
    assert abs(f.wn_p1_at_es_m1 - ref.wn_p1_at_es_m1) < 100.0
    assert abs(f.wn_p1_at_es_0 - ref.wn_p1_at_es_0) < 100.0
    assert abs(f.wn_m1_at_es_0 - ref.wn_m1_at_es_0) < 100.0
    assert abs(f.we_at_ni_m1 - ref.we_at_ni_m1) < 1e3
    assert abs(f.we_at_ni_0 - ref.we_at_ni_0) < 1e3


def test_nitrogen_qubit_line_at_quoted_params():
    # tabulated parameter set places the qubit line within the closed-form
    # bias (~160 Hz) of the measured 7.120706 MHz
    f = level_frequencies(SystemParams(), method="exact")
    assert f.wn_m1_at_es_m1 == pytest.approx(7.120706e6, abs=250.0)


@pytest.mark.xfail(
    strict=True,
    reason="tabulated m_I=0 electron line (2.699101 GHz) is inconsistent with "
    "the level model at the ~7 kHz level; see decisions notes",
)
def test_tabulated_electron_line_mI0():
    f = level_frequencies(REFERENCE_PARAMS, method="exact")
    assert abs(f.we_at_ni_0 - 2.699101e9) < 1e3


def test_perturbative_closed_forms_match_quoted_values():
    # the closed forms at the tabulated parameters reproduce the tabulated
    # line values (these were derived from each other)
    f = level_frequencies(SystemParams(), method="perturbative")
    assert f.wn_m1_at_es_m1 == pytest.approx(7.120706e6, abs=5.0)
    assert f.wn_p1_at_es_m1 == pytest.approx(2.780105e6, abs=5.0)
    assert f.wn_p1_at_es_0 == pytest.approx(4.965825e6, abs=5.0)
    assert f.wn_m1_at_es_0 == pytest.approx(4.927491e6, abs=5.0)
    assert f.we_at_ni_m1 == pytest.approx(2.701294e9, abs=500.0)


def test_perturbative_s3_value():
    p = SystemParams()
    f = level_frequencies(p, method="perturbative")
    expected = -p.q - p.gamma_n * p.bz - p.azz
    assert f.wn_p1_at_es_m1 == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(2.780105e6, abs=1.0)


def test_exact_matches_second_order_oracle():
    p = SystemParams()
    exact = level_frequencies(p, method="exact").as_array()
    oracle = second_order_oracle(p).as_array()
    tol = abs(p.aperp**2 / p.d) * 1e-2
    assert np.abs(exact - oracle).max() < tol


def test_exact_equals_perturbative_when_no_mixing():
    p = SystemParams(bperp=0.0, axx=0.0, ayy=0.0)
    exact = level_frequencies(p, method="exact").as_array()
    pert = level_frequencies(p, method="perturbative").as_array()
    assert np.abs(exact / pert - 1).max() < 1e-9


def test_fit_recovers_quoted_params_within_uncertainty():
    tabulated = LevelFrequencies(
        wn_m1_at_es_m1=7.120706e6,
        wn_p1_at_es_m1=2.780105e6,
        wn_p1_at_es_0=4.965825e6,
        wn_m1_at_es_0=4.927491e6,
        we_at_ni_m1=2.701294e9,
        we_at_ni_0=2.699101e9,
    )
    p = fit_params_from_frequencies(tabulated, sigmas=LINE_SIGMAS)
    assert abs(p.d - 2.873668e9) < 9e3
    assert abs(p.bz - 62.291) < 0.003
    assert abs(p.q - (-4.949156e6)) < 10.0
    assert abs(p.azz - 2.188218e6) < 20.0
    assert abs(p.aperp - 2.679e6) < 1e3


def test_fit_round_trip_exactness():
    p0 = SystemParams(d=2.9e9, q=-5.1e6, bz=55.0, azz=2.3e6, axx=2.5e6, ayy=2.5e6)
    f = level_frequencies(p0, method="perturbative")
    p1 = fit_params_from_frequencies(f, gamma_e=p0.gamma_e, gamma_n=p0.gamma_n)
    for name in ("d", "q", "bz", "azz"):
        assert getattr(p1, name) == pytest.approx(getattr(p0, name), rel=1e-9)
    assert p1.aperp == pytest.approx(p0.aperp, rel=1e-9)


def test_fit_zero_aperp():
    p0 = SystemParams(axx=0.0, ayy=0.0)
    f = level_frequencies(p0, method="perturbative")
    p1 = fit_params_from_frequencies(f)
    assert abs(p1.aperp) < 1.0


def test_fit_exact_method_closes_reference_lines():
    p = fit_params_from_frequencies(
        REFERENCE_FREQUENCIES, sigmas=LINE_SIGMAS, method="exact"
    )
    f = level_frequencies(p, method="exact").as_array()
    resid = np.abs(f - REFERENCE_FREQUENCIES.as_array())
    assert resid[:4].max() < 100.0
    assert resid[4:].max() < 1e3


@given(st.integers(0, 500))
@settings(max_examples=20, deadline=None)
def test_hermiticity_property(seed):
    rng = np.random.default_rng(seed)
    aperp = rng.uniform(1e6, 3e6)
    p = SystemParams(
        d=rng.uniform(2.5e9, 3.0e9),
        q=-rng.uniform(4e6, 6e6),
        bz=rng.uniform(10, 500),
        bperp=rng.uniform(0, 2),
        axx=aperp,
        ayy=aperp,
        azz=rng.uniform(1e6, 3e6),
    )
    assert is_hermitian(build_hamiltonian(p))


@given(st.floats(1.0, 30.0))
@settings(max_examples=20, deadline=None)
def test_bz_monotonicity(delta_bz):
    # exactly gamma_e * dBz when the transverse couplings vanish; the
    # flip-flop denominators add a ~1e-6 relative correction otherwise
    p = SystemParams(bperp=0.0, axx=0.0, ayy=0.0)
    f0 = level_frequencies(p, method="exact")
    f1 = level_frequencies(p.replace(bz=p.bz + delta_bz), method="exact")
    drop = f0.we_at_ni_0 - f1.we_at_ni_0
    assert drop == pytest.approx(p.gamma_e * delta_bz, rel=1e-9)
    p2 = SystemParams(bperp=0.0)
    g0 = level_frequencies(p2, method="exact")
    g1 = level_frequencies(p2.replace(bz=p2.bz + delta_bz), method="exact")
    assert g0.we_at_ni_0 - g1.we_at_ni_0 == pytest.approx(p2.gamma_e * delta_bz, rel=1e-5)


@given(
    st.floats(2.6e9, 3.1e9),
    st.floats(-6e6, -4e6),
    st.floats(20.0, 200.0),
    st.floats(1.5e6, 3.0e6),
    st.floats(0.0, 3.0e6),
)
@settings(max_examples=30, deadline=None)
def test_forward_backward_consistency_property(d, q, bz, azz, aperp):
    p0 = SystemParams(d=d, q=q, bz=bz, azz=azz, axx=aperp, ayy=aperp)
    f = level_frequencies(p0, method="perturbative")
    p1 = fit_params_from_frequencies(f)
    assert p1.d == pytest.approx(p0.d, rel=1e-9)
    assert p1.aperp == pytest.approx(p0.aperp, rel=1e-7, abs=1.0)


def test_labeling_fails_for_huge_mixing():
    # bperp large enough that electron manifolds hybridize beyond labeling
    p = SystemParams(d=1e7, q=-4.9e6, bz=1.0, bperp=50.0, azz=2.2e6)
    with pytest.raises(ValueError):
        labeled_levels(p)


def test_json_round_trip():
    p = SystemParams(bperp=0.414)
    q = SystemParams.from_json(p.to_json())
    assert dataclasses.asdict(q) == dataclasses.asdict(p)


def test_invariants_enforced():
    with pytest.raises(ValueError):
        SystemParams(q=1.0)
    with pytest.raises(ValueError):
        SystemParams(axx=2.679e6, ayy=2.75e6)
