"""Pulse shapes and time-dependent propagation of the two-spin register.

The integrator works in the dressed eigenbasis of the static Hamiltonian
(so level energies, including all transverse-coupling shifts, are exact) and
by default in a doubly rotating frame: the electron m_s = +/-1 manifolds
rotate at ``mw_ref`` and the nitrogen m_I = +/-1 levels at ``rf_ref``.  In
that frame

* delays are propagated analytically in a single exponential,
* microwave drives keep only the co-rotating inter-manifold coupling (the
  m_s 0 <-> +1 matrix elements survive as a static, far-detuned coupling so
  leakage and AC shifts remain physical),
* radio-frequency drives are integrated with their full time dependence
  (carriers of a few MHz resolve comfortably at 1 ns steps), so no rotating
  wave approximation is made on the nitrogen drive.

Lab-frame integration (no RWA anywhere, sub-carrier-period steps on MW
segments) is retained as a validation mode; its result is converted into the
rotating frame before being returned, so both modes produce directly
comparable propagators.

Segment phase convention: ``phase`` is the azimuth of the rotation axis on
the driven transition (0 -> x, pi/2 -> y); in lab terms the emitted field is
``amp(t) * cos(2 pi f t - phase)``.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import scipy.linalg
import scipy.special

from .config import NUMERICS
from .spinalg import lindblad_superop, unitary_superop
from .system import SPIN1_X, SystemParams, labeled_levels, level_frequencies

__all__ = [
    "Envelope",
    "Segment",
    "PulseSequence",
    "NoiseSpec",
    "RotatingFrame",
    "PropagationResult",
    "envelope_eval",
    "envelope_area",
    "default_frame",
    "propagate",
    "delay",
    "mw_pulse",
    "rf_pulse",
]

HERMITE_WIDTH = 0.1667  # envelope x = (t - T/2) / (HERMITE_WIDTH * T)


@dataclasses.dataclass(frozen=True)
class Envelope:
    """Pulse envelope; ``amplitude`` is the Rabi frequency (Hz) of the
    resonantly driven transition at the envelope peak.

    ``shape_duration`` (hermite only) sets the width normalization of the
    shape while ``duration`` remains the played window; 0 means both agree.
    It is the calibration degree of freedom that reconciles a fixed window
    and peak amplitude with an exact rotation area.
    """

    kind: str                      # hermite | square | erf_rf
    amplitude: float
    duration: float
    eta: float = 0.0               # hermite only
    risetime: float = 0.0          # erf_rf only
    shape_duration: float = 0.0    # hermite only; 0 -> duration

    def __post_init__(self):
        if self.kind not in ("hermite", "square", "erf_rf"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if self.amplitude < 0 or self.duration <= 0:
            raise ValueError("amplitude must be >= 0 and duration > 0")
        if not 0 <= self.risetime <= self.duration / 2:
            raise ValueError("risetime must lie in [0, duration/2]")
        if self.shape_duration < 0 or self.shape_duration > self.duration:
            raise ValueError("shape_duration must lie in [0, duration]")


def envelope_eval(env: Envelope, t):
    """Instantaneous Rabi frequency at time t (s) from the pulse start.

    Accepts scalars or arrays; raises if any t lies outside [0, duration].
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-15) or np.any(t > env.duration + 1e-15):
        raise ValueError("t outside [0, T_pulse]")
    if env.kind == "square":
        out = np.full_like(t, env.amplitude)
    elif env.kind == "hermite":
        t_shape = env.shape_duration if env.shape_duration > 0 else env.duration
        x = (t - env.duration / 2) / (HERMITE_WIDTH * t_shape)
        out = env.amplitude * (1 - env.eta * x**2) * np.exp(-(x**2))
    else:  # erf_rf
        if env.risetime == 0:
            out = np.full_like(t, env.amplitude)
        else:
            sigma = env.risetime / 4.0
            lo = scipy.special.erf((t - env.risetime / 2) / (np.sqrt(2) * sigma))
            hi = scipy.special.erf(
                (t - (env.duration - env.risetime / 2)) / (np.sqrt(2) * sigma)
            )
            out = env.amplitude * 0.5 * (lo - hi)
    return out if out.ndim else float(out)


def envelope_area(env: Envelope, n: int = 20001) -> float:
    """Integral of the Rabi frequency over the pulse (rotation angle / 2 pi)."""
    ts = np.linspace(0.0, env.duration, n)
    return float(np.trapezoid(envelope_eval(env, ts), ts))


@dataclasses.dataclass(frozen=True)
class Segment:
    kind: str                       # delay | mw_pulse | rf_pulse
    duration: float
    envelope: Envelope | None = None
    carrier: float = 0.0            # Hz
    phase: float = 0.0              # rad, rotation-axis azimuth

    def __post_init__(self):
        if self.kind not in ("delay", "mw_pulse", "rf_pulse"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")
        if self.kind == "delay":
            if self.envelope is not None:
                raise ValueError("delay segments carry no envelope")
        else:
            if self.envelope is None or self.carrier <= 0:
                raise ValueError("pulses need an envelope and a positive carrier")
            if abs(self.envelope.duration - self.duration) > 1e-15:
                raise ValueError("envelope duration must match segment duration")


def delay(duration: float) -> Segment:
    return Segment("delay", duration)


def mw_pulse(envelope: Envelope, carrier: float, phase: float = 0.0) -> Segment:
    return Segment("mw_pulse", envelope.duration, envelope, carrier, phase)


def rf_pulse(envelope: Envelope, carrier: float, phase: float = 0.0) -> Segment:
    return Segment("rf_pulse", envelope.duration, envelope, carrier, phase)


@dataclasses.dataclass(frozen=True)
class RotatingFrame:
    mw_ref: float
    rf_ref: float


def default_frame(params: SystemParams) -> RotatingFrame:
    """MW frame at the m_I = 0 electron line; nitrogen frame at the average
    qubit precession frequency (the phase-tracking reference).

    References are signed by the actual level ordering: the m_s = -1 manifold
    lies above m_s = 0, while the m_I = +/-1 nitrogen levels lie below
    m_I = 0, so the nitrogen reference is negative.
    """
    f = level_frequencies(params, method="exact")
    return RotatingFrame(
        mw_ref=f.we_at_ni_0,
        rf_ref=-0.5 * (f.wn_m1_at_es_m1 + f.wn_m1_at_es_0),
    )


@dataclasses.dataclass(frozen=True)
class PulseSequence:
    segments: tuple[Segment, ...]
    frame: RotatingFrame
    lab_frame: bool = False

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        if self.frame != other.frame:
            raise ValueError("cannot concatenate sequences in different frames")
        return PulseSequence(self.segments + other.segments, self.frame, self.lab_frame)

    def to_json(self) -> str:
        segs = []
        for s in self.segments:
            doc = {"kind": s.kind, "duration": s.duration}
            if s.envelope is not None:
                doc["envelope"] = dataclasses.asdict(s.envelope)
                doc["carrier"] = s.carrier
                doc["phase"] = s.phase
            segs.append(doc)
        return json.dumps(
            {
                "frame": {"mw_ref": self.frame.mw_ref, "rf_ref": self.frame.rf_ref},
                "lab_frame": self.lab_frame,
                "segments": segs,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PulseSequence":
        doc = json.loads(text)
        segs = []
        for s in doc["segments"]:
            env = Envelope(**s["envelope"]) if "envelope" in s else None
            segs.append(
                Segment(
                    s["kind"], s["duration"], env,
                    s.get("carrier", 0.0), s.get("phase", 0.0),
                )
            )
        return cls(
            tuple(segs),
            RotatingFrame(**doc["frame"]),
            doc.get("lab_frame", False),
        )


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
    detuning_e: float = 0.0        # Hz added to the electron 0 <-> -1 transition
    detuning_n: float = 0.0        # Hz added to the nitrogen 0 <-> -1 transition
    dephasing_rate_e: float = 0.0  # Hz, Lindblad rate on the electron Sz
    dephasing_rate_n: float = 0.0  # Hz, Lindblad rate on the nitrogen Iz

    def __post_init__(self):
        if self.dephasing_rate_e < 0 or self.dephasing_rate_n < 0:
            raise ValueError("dephasing rates must be nonnegative")

    @property
    def is_unitary(self) -> bool:
        return self.dephasing_rate_e == 0.0 and self.dephasing_rate_n == 0.0


@dataclasses.dataclass
class PropagationResult:
    """Propagator over the sequence, expressed in the dressed level basis and
    the sequence's rotating frame (rows/columns ordered like the bare product
    basis, so the computational indices of QubitEncoding apply directly)."""

    unitary: np.ndarray | None
    superop: np.ndarray | None
    duration: float
    warnings: list[str]

    @property
    def as_superop(self) -> np.ndarray:
        if self.superop is not None:
            return self.superop
        return unitary_superop(self.unitary)


class _Model:
    """Dressed-basis operators and frame bookkeeping for one parameter set."""

    def __init__(self, params: SystemParams, frame: RotatingFrame, noise: NoiseSpec):
        energies, v, labels = labeled_levels(params)
        self.v = v
        self.labels = labels
        e = np.array([energies[lab] for lab in labels])
        k = np.array(
            [
                frame.mw_ref * (ms != 0) + frame.rf_ref * (mi != 0)
                for ms, mi in labels
            ]
        )
        self.k = k
        vd = v.conj().T
        sz_e = vd @ np.kron(np.diag([1.0, 0.0, -1.0]), np.eye(3)) @ v
        iz_n = vd @ np.kron(np.eye(3), np.diag([1.0, 0.0, -1.0])) @ v
        self.h_static_frame = (
            np.diag(e - k)
            - noise.detuning_e * sz_e
            - noise.detuning_n * iz_n
        )
        self.h_static_lab = (
            np.diag(e) - noise.detuning_e * sz_e - noise.detuning_n * iz_n
        )
        sq2 = np.sqrt(2.0)
        self.x_mw = vd @ np.kron(sq2 * SPIN1_X, np.eye(3)) @ v
        self.x_rf = vd @ np.kron(np.eye(3), sq2 * SPIN1_X) @ v
        # frame-frequency differences between levels
        dk = k[:, None] - k[None, :]
        self.dk = dk
        # MW co-rotating block: elements whose frame difference is exactly the
        # MW reference (same nitrogen level); dressed cross elements rotating
        # at mw_ref +/- rf_ref are dropped with the counter-rotating terms
        raising = np.abs(dk - frame.mw_ref) < 1.0
        self.mw_coupling = np.where(raising, self.x_mw, 0.0)
        self.collapse = []
        if noise.dephasing_rate_e > 0:
            self.collapse.append((noise.dephasing_rate_e, sz_e))
        if noise.dephasing_rate_n > 0:
            self.collapse.append((noise.dephasing_rate_n, iz_n))


def _batched_unitary(hs: np.ndarray, dt: float) -> np.ndarray:
    """Slice propagators exp(-2*pi*i*H*dt) for a stack of Hamiltonians."""
    w, v = np.linalg.eigh(hs)
    phases = np.exp(-2j * np.pi * w * dt)
    return np.einsum("kij,kj,klj->kil", v, phases, v.conj())


def _compose(units: np.ndarray, start: np.ndarray | None = None) -> np.ndarray:
    u = np.eye(units.shape[-1], dtype=complex) if start is None else start
    for k in range(units.shape[0]):
        u = units[k] @ u
    return u


def _segment_hamiltonians(
    model: _Model,
    seg: Segment,
    t_start: float,
    t_local: np.ndarray,
    lab: bool,
) -> np.ndarray:
    """Stack of frozen mid-slice Hamiltonians at the given local times."""
    n = t_local.size
    amps = np.atleast_1d(envelope_eval(seg.envelope, t_local))
    t_abs = t_start + t_local
    h0 = model.h_static_lab if lab else model.h_static_frame
    hs = np.broadcast_to(h0, (n, 9, 9)).copy()
    if lab:
        x = model.x_mw if seg.kind == "mw_pulse" else model.x_rf
        drive = amps * np.cos(2 * np.pi * seg.carrier * t_abs - seg.phase)
        hs += drive[:, None, None] * x
    elif seg.kind == "mw_pulse":
        # co-rotating inter-manifold part only; carrier offset from the frame
        # appears as a slow phase ramp
        delta = seg.carrier - _frame_ref(model, "mw")
        phases = np.exp(1j * (2 * np.pi * delta * t_abs + seg.phase))
        term = 0.5 * phases[:, None, None] * model.mw_coupling[None, :, :]
        hs += amps[:, None, None] * (term + term.conj().transpose(0, 2, 1))
    else:
        # full RF drive; frame phases restored element-wise
        framed = np.exp(2j * np.pi * model.dk[None, :, :] * t_abs[:, None, None])
        drive = amps * np.cos(2 * np.pi * seg.carrier * t_abs - seg.phase)
        hs += drive[:, None, None] * (model.x_rf[None, :, :] * framed)
    return hs


def _frame_ref(model: _Model, which: str) -> float:
    # the frame frequency is encoded in k; recover it from any shifted level
    for (ms, mi), kval in zip(model.labels, model.k):
        if which == "mw" and ms != 0 and mi == 0:
            return kval
        if which == "rf" and ms == 0 and mi != 0:
            return kval
    return 0.0


_CHUNK = 4096


def _dissipator_superop(model: _Model) -> np.ndarray:
    return lindblad_superop(np.zeros((9, 9)), model.collapse)


def _propagate_once(
    params: SystemParams,
    seq: PulseSequence,
    noise: NoiseSpec,
    dt: float | None,
    t0: float,
) -> PropagationResult:
    model = _Model(params, seq.frame, noise)
    lab = seq.lab_frame
    unitary_path = noise.is_unitary
    warnings: list[str] = []

    u = np.eye(9, dtype=complex)
    s = np.eye(81, dtype=complex) if not unitary_path else None
    mw_cache: dict[tuple, np.ndarray] = {}
    diss = None if unitary_path else _dissipator_superop(model)
    half_kick: dict[float, np.ndarray] = {}

    def kick(step: float) -> np.ndarray:
        # Strang half-step of the (static) dissipator
        if step not in half_kick:
            half_kick[step] = scipy.linalg.expm(diss * step / 2.0)
        return half_kick[step]

    t = t0
    for seg in seq.segments:
        if seg.kind == "delay":
            h = model.h_static_lab if lab else model.h_static_frame
            if unitary_path:
                w, v = np.linalg.eigh(h)
                u_seg = (v * np.exp(-2j * np.pi * w * seg.duration)) @ v.conj().T
                u = u_seg @ u
            else:
                lv = lindblad_superop(h, model.collapse)
                s = scipy.linalg.expm(lv * seg.duration) @ s
            t += seg.duration
            continue

        if dt is None:
            if lab:
                step = NUMERICS.dt_lab if seg.kind == "mw_pulse" else NUMERICS.dt_rotating
            else:
                step = NUMERICS.dt_rotating
            step = min(step, seg.duration / 20)
        else:
            step = dt
            if step > seg.duration / 20:
                raise ValueError("dt too coarse: must be <= shortest pulse duration / 20")

        cacheable = (
            not lab
            and seg.kind == "mw_pulse"
            and abs(seg.carrier - _frame_ref(model, "mw")) < 1e-9
        )
        key = (seg.envelope, seg.phase, step, unitary_path) if cacheable else None
        if key is not None and key in mw_cache:
            hit = mw_cache[key]
            if unitary_path:
                u = hit @ u
            else:
                s = hit @ s
            t += seg.duration
            continue

        n = max(1, math.ceil(seg.duration / step))
        dt_actual = seg.duration / n
        op_seg = np.eye(9, dtype=complex) if unitary_path else np.eye(81, dtype=complex)
        for lo in range(0, n, _CHUNK):
            idx = np.arange(lo, min(lo + _CHUNK, n))
            t_local = (idx + 0.5) * dt_actual
            hs = _segment_hamiltonians(model, seg, t, t_local, lab)
            units = _batched_unitary(hs, dt_actual)
            if unitary_path:
                op_seg = _compose(units, start=op_seg)
            else:
                k_half = kick(dt_actual)
                for m in range(units.shape[0]):
                    op_seg = (k_half @ unitary_superop(units[m]) @ k_half) @ op_seg
        if key is not None:
            mw_cache[key] = op_seg
        if unitary_path:
            u = op_seg @ u
        else:
            s = op_seg @ s
        t += seg.duration

    if lab:
        # convert into the rotating frame at the final time so results are
        # comparable with rotating-frame propagation
        total = t - t0
        phase = np.exp(2j * np.pi * model.k * total)
        if unitary_path:
            u = np.diag(phase) @ u
        else:
            s = unitary_superop(np.diag(phase)) @ s

    if unitary_path:
        dev = np.abs(u.conj().T @ u - np.eye(9)).max()
        if dev > 1e-8:
            warnings.append(f"unitarity deviation {dev:.2e}")
        return PropagationResult(u, None, seq.duration, warnings)
    return PropagationResult(None, s, seq.duration, warnings)


def propagate(
    params: SystemParams,
    seq: PulseSequence,
    noise: NoiseSpec = NoiseSpec(),
    dt: float | None = None,
    t0: float = 0.0,
    check_convergence: bool = False,
) -> PropagationResult:
    """Propagate a pulse sequence from absolute time ``t0``.

    Returns the propagator in the dressed basis and rotating frame.  With all
    dephasing rates zero the result carries a 9x9 unitary, otherwise an 81x81
    superoperator.  ``check_convergence`` re-integrates with a doubled step
    and records a warning when the two disagree beyond the configured bound.
    """
    result = _propagate_once(params, seq, noise, dt, t0)
    if check_convergence:
        step = dt if dt is not None else (
            NUMERICS.dt_lab if seq.lab_frame else NUMERICS.dt_rotating
        )
        coarse = _propagate_once(params, seq, noise, 2 * step, t0)
        if result.unitary is not None and coarse.unitary is not None:
            dev = np.abs(result.unitary - coarse.unitary).max()
        else:
            dev = np.abs(result.as_superop - coarse.as_superop).max()
        if dev > NUMERICS.dt_convergence:
            result.warnings.append(
                f"time step not converged: doubling dt moves the propagator by {dev:.2e}"
            )
    return result
