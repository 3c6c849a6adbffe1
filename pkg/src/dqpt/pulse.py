"""Pulse-level compilation and simulation on two three-level neutral atoms.

Each atom has levels ``(g, h, r)`` with the qubit stored as ``|0> = g`` and
``|1> = h``. The digital channel drives ``g <-> h`` and the Rydberg channel
drives ``g <-> r``. Two atoms interact through ``V n_r (x) n_r`` with
``V = C6 / d^6``.

Two-atom amplitudes are stored as a 3x3 array ``psi[level_of_atom1, level_of_atom0]``,
matching the qubit ordering of :mod:`dqpt.circuit` (atom ``q`` carries qubit ``q``).

Units: time in microseconds, angular frequencies in rad/us, distances in um.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from math import ceil, pi
from typing import Union

import numpy as np

from .circuit import CZ_MATRIX, Circuit, Gate, on_qubit, rz
from .synthesis import _fuse_single_qubit, virtualize_z

LEVELS = ("g", "h", "r")
G, H, R = 0, 1, 2
BLACKMAN_MEAN = 0.42
SCHEMA_VERSION = 1

# 87Rb mass in kg and Boltzmann constant in J/K
RB87_MASS = 86.909180527 * 1.66053906660e-27
BOLTZMANN = 1.380649e-23


@dataclass(frozen=True)
class DeviceConfig:
    """Register geometry and laser limits.

    ``rydberg_pi_duration`` fixes the length of the CZ pi pulses (the 2 pi
    pulse is twice as long); ``None`` selects the shortest Blackman pulse
    allowed by ``omega_max``. ``lambda_eff`` is the effective wavelength of
    the Rydberg excitation used for Doppler shifts.
    """

    positions: tuple[tuple[float, float], ...] = ((0.0, 0.0), (4.0, 0.0))
    omega_max: float = 62.831
    c6: float = 62.831 * 8.7**6
    min_spacing: float = 4.0
    resolution: float = 0.001
    rydberg_pi_duration: float | None = None
    lambda_eff: float = 0.722
    atom_mass: float = RB87_MASS
    name: str = "default"

    def __post_init__(self):
        pos = tuple(tuple(float(c) for c in p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) != 2:
            raise ValueError("the register must hold exactly two atoms")
        if self.omega_max <= 0:
            raise ValueError("omega_max must be positive")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.spacing < self.min_spacing - 1e-12:
            raise ValueError(
                f"atoms are {self.spacing:.3f} um apart, below min_spacing {self.min_spacing}"
            )

    @property
    def spacing(self) -> float:
        return float(np.hypot(*np.subtract(self.positions[0], self.positions[1])))

    @property
    def interaction(self) -> float:
        """``C6 / d^6`` in rad/us."""
        return self.c6 / self.spacing**6

    def to_json(self) -> str:
        d = asdict(self)
        d["positions"] = [list(p) for p in self.positions]
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DeviceConfig":
        d = json.loads(text)
        d["positions"] = tuple(tuple(p) for p in d["positions"])
        return cls(**d)

    @classmethod
    def preset(cls, name: str = "device") -> "DeviceConfig":
        """Load a device shipped in ``dqpt/presets``."""
        from importlib import resources

        return cls.from_json(resources.files("dqpt.presets").joinpath(f"{name}.json").read_text())


def blockade_radius(omega: float, c6: float = DeviceConfig.c6) -> float:
    """``(C6 / Omega)^(1/6)`` in um."""
    if omega <= 0:
        raise ValueError(f"Rabi frequency must be positive, got {omega}")
    return (c6 / omega) ** (1 / 6)


# --- waveforms -------------------------------------------------------------


def _sample_count(duration: float, resolution: float) -> int:
    n = round(duration / resolution)
    if n < 1 or abs(n * resolution - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of resolution {resolution}")
    return n


@lru_cache(maxsize=256)
def _blackman_shape(n: int) -> np.ndarray:
    x = (np.arange(n) + 0.5) / n
    w = 0.42 - 0.5 * np.cos(2 * pi * x) + 0.08 * np.cos(4 * pi * x)
    w.flags.writeable = False
    return w


def blackman_waveform(
    area: float, duration: float, resolution: float = 0.001, omega_max: float | None = None
) -> np.ndarray:
    """Blackman-window samples whose Riemann sum ``sum(w) * resolution`` equals ``area``."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = _sample_count(duration, resolution)
    shape = _blackman_shape(n)
    w = shape * (area / (shape.sum() * resolution))
    if omega_max is not None and np.abs(w).max() > omega_max * (1 + 1e-12):
        raise ValueError(
            f"area {area:.6g} over {duration} us needs peak {np.abs(w).max():.6g} rad/us "
            f"above omega_max {omega_max}; lengthen the pulse"
        )
    return w


def minimal_duration(area: float, omega_max: float, resolution: float = 0.001) -> float:
    """Shortest multiple of ``resolution`` whose Blackman pulse of ``area`` stays below ``omega_max``."""
    area = abs(area)
    if area == 0:
        return resolution
    n = max(1, ceil(area / (BLACKMAN_MEAN * omega_max * resolution)) - 2)
    while True:
        shape = _blackman_shape(n)
        if area * shape.max() / (shape.sum() * resolution) <= omega_max:
            return n * resolution
        n += 1


# --- sequence types --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pulse:
    channel: str
    target: int
    amplitude: np.ndarray
    detuning: np.ndarray
    phase: float
    duration: float
    resolution: float = 0.001
    label: str = ""

    def __post_init__(self):
        if self.channel not in ("digital", "rydberg"):
            raise ValueError(f"unknown channel {self.channel!r}")
        amp = np.asarray(self.amplitude, dtype=float)
        det = np.asarray(self.detuning, dtype=float)
        n = _sample_count(self.duration, self.resolution)
        if amp.shape != (n,) or det.shape != (n,):
            raise ValueError(f"waveforms must hold {n} samples")
        if np.any(amp < 0):
            raise ValueError("amplitude waveform must be non-negative")
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "detuning", det)

    @property
    def area(self) -> float:
        return float(self.amplitude.sum() * self.resolution)

    def to_dict(self) -> dict:
        return {
            "type": "pulse",
            "channel": self.channel,
            "target": self.target,
            "amplitude": self.amplitude.tolist(),
            "detuning": self.detuning.tolist(),
            "phase": self.phase,
            "duration": self.duration,
            "resolution": self.resolution,
            "label": self.label,
        }


@dataclass(frozen=True)
class FrameShift:
    """Instantaneous ``Rz(angle)`` on the qubit of atom ``target``."""

    target: int
    angle: float
    duration: float = 0.0

    def __post_init__(self):
        if self.duration != 0:
            raise ValueError("frame shifts take no time")

    def to_dict(self) -> dict:
        return {"type": "frame", "target": self.target, "angle": self.angle}


@dataclass(frozen=True)
class Measure:
    duration: float = 0.0

    def to_dict(self) -> dict:
        return {"type": "measure"}


Item = Union[Pulse, FrameShift, Measure]


@dataclass(frozen=True)
class PulseSequence:
    items: tuple[Item, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self):
        return len(self.items)

    @property
    def pulses(self) -> list[Pulse]:
        return [it for it in self.items if isinstance(it, Pulse)]

    @property
    def duration(self) -> float:
        return float(sum(it.duration for it in self.items))

    def duration_by_label(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for p in self.pulses:
            out[p.label] = out.get(p.label, 0.0) + p.duration
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "metadata": self.metadata,
                "items": [it.to_dict() for it in self.items],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PulseSequence":
        d = json.loads(text)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported pulse schema version {d.get('schema_version')}")
        items = []
        for it in d["items"]:
            kind = it.pop("type")
            if kind == "pulse":
                items.append(Pulse(**it))
            elif kind == "frame":
                items.append(FrameShift(**it))
            elif kind == "measure":
                items.append(Measure())
            else:
                raise ValueError(f"unknown sequence item {kind!r}")
        return cls(tuple(items), d.get("metadata", {}))


@dataclass(frozen=True, eq=False)
class AtomState:
    """Amplitudes over ``(level of atom 1, level of atom 0)``, shape (3, 3)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(3, 3)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def ground(cls) -> "AtomState":
        a = np.zeros((3, 3), dtype=complex)
        a[G, G] = 1.0
        return cls(a)

    @classmethod
    def from_qubits(cls, psi: np.ndarray) -> "AtomState":
        """Embed a two-qubit vector (index ``2 q1 + q0``) into the atom space."""
        psi = np.asarray(psi, dtype=complex)
        a = np.zeros((3, 3), dtype=complex)
        a[:2, :2] = psi.reshape(2, 2)
        return cls(a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def qubit_amplitudes(self) -> np.ndarray:
        return self.amplitudes[:2, :2].reshape(4)

    def level_probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def rr_population(self) -> float:
        return float(abs(self.amplitudes[R, R]) ** 2)


# --- compilation -----------------------------------------------------------


def _expand_cnot(circuit: Circuit) -> list[Gate]:
    out = []
    for g in circuit.gates:
        if g.kind == "CNOT":
            h = Gate("Hadamard", target=g.target)
            out += [h, Gate("CZ", target=g.target, control=g.control), h]
        else:
            out.append(g)
    return out


def _digital_pulse(theta: float, phase: float, target: int, dev: DeviceConfig) -> Pulse:
    if theta < 0:
        theta, phase = -theta, phase + pi
    phase = float((phase + pi) % (2 * pi) - pi)
    tau = minimal_duration(theta, dev.omega_max, dev.resolution)
    amp = blackman_waveform(theta, tau, dev.resolution, dev.omega_max)
    return Pulse("digital", target, amp, np.zeros_like(amp), phase, tau, dev.resolution, "single")


def _rydberg_pulse(area: float, target: int, dev: DeviceConfig) -> Pulse:
    base = dev.rydberg_pi_duration or minimal_duration(pi, dev.omega_max, dev.resolution)
    tau = base * round(area / pi)
    amp = blackman_waveform(area, tau, dev.resolution, dev.omega_max)
    return Pulse("rydberg", target, amp, np.zeros_like(amp), 0.0, tau, dev.resolution, "cz")


def cz_pulses(control: int, target: int, dev: DeviceConfig) -> list[Pulse]:
    """Blockade CZ: pi on the control, 2 pi on the target, pi on the control."""
    return [
        _rydberg_pulse(pi, control, dev),
        _rydberg_pulse(2 * pi, target, dev),
        _rydberg_pulse(pi, control, dev),
    ]


def compile_to_pulses(circuit: Circuit, dev: DeviceConfig | None = None, measure: bool = True) -> PulseSequence:
    """Map a circuit onto digital and Rydberg pulses.

    CNOTs become ``H CZ H``; runs of one-qubit gates are fused; Z content is
    carried by pulse phases and trailing frame shifts. Each CZ is followed by
    Z corrections calibrated for ``dev`` (also absorbed into frames), so the
    compiled block acts as an ideal CZ up to global phase.
    """
    dev = dev or DeviceConfig()
    if any(g.kind == "U2q" for g in circuit.gates):
        raise ValueError("U2q gates have no pulse template; compress the circuit first")
    gates, _ = _fuse_single_qubit(_expand_cnot(circuit))
    cal = calibrate_cz(dev)
    with_corrections = []
    for g in gates:
        with_corrections.append(g)
        if g.kind == "CZ":
            corr = cal.corrections(g.control, g.target)
            with_corrections += [Gate("RZ", target=q, angle=a) for q, a in corr if a]
    native = virtualize_z(Circuit(tuple(with_corrections)))
    items: list[Item] = []
    for g in native.gates:
        if g.kind == "RX":
            items.append(_digital_pulse(g.angle, g.phase, g.target, dev))
        elif g.kind == "CZ":
            items += cz_pulses(g.control, g.target, dev)
        elif g.kind == "VirtualZ":
            items.append(FrameShift(g.target, g.angle))
        else:
            raise AssertionError(g.kind)
    if measure:
        items.append(Measure())
    return PulseSequence(tuple(items), {"device": dev.name, "source_gates": len(circuit.gates)})


# --- integration -----------------------------------------------------------


def _sample_factors(omega, delta, phase, dt, shift):
    """Entries of the per-sample propagators
    ``exp(-i dt [(Omega/2)(cos(p) X - sin(p) Y) - (delta/2) Z + shift |1><1|])``
    on the (lower, upper) pair, broadcast over leading axes."""
    hx = omega * np.cos(phase) / 2
    hy = -omega * np.sin(phase) / 2
    hz = -(delta + shift) / 2
    norm = np.sqrt(hx**2 + hy**2 + hz**2)
    c = np.cos(norm * dt)
    safe = np.where(norm > 0, norm, 1.0)
    s = np.where(norm > 0, np.sin(norm * dt) / safe, dt)
    ph = np.exp(-0.5j * shift * dt)
    return (
        ph * (c - 1j * s * hz),
        ph * (-1j * s * (hx - 1j * hy)),
        ph * (-1j * s * (hx + 1j * hy)),
        ph * (c + 1j * s * hz),
    )


def _ordered_product(u00, u01, u10, u11) -> np.ndarray:
    """Time-ordered product along the last axis (later samples on the left)."""
    while u00.shape[-1] > 1:
        if u00.shape[-1] % 2:
            pad = [(0, 0)] * (u00.ndim - 1) + [(0, 1)]
            u00 = np.pad(u00, pad, constant_values=1)
            u01 = np.pad(u01, pad)
            u10 = np.pad(u10, pad)
            u11 = np.pad(u11, pad, constant_values=1)
        e00, e01, e10, e11 = u00[..., 0::2], u01[..., 0::2], u10[..., 0::2], u11[..., 0::2]
        l00, l01, l10, l11 = u00[..., 1::2], u01[..., 1::2], u10[..., 1::2], u11[..., 1::2]
        u00, u01, u10, u11 = (
            l00 * e00 + l01 * e10,
            l00 * e01 + l01 * e11,
            l10 * e00 + l11 * e10,
            l10 * e01 + l11 * e11,
        )
    out = np.empty(u00.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 0, 1] = u00[..., 0], u01[..., 0]
    out[..., 1, 0], out[..., 1, 1] = u10[..., 0], u11[..., 0]
    return out


@dataclass(frozen=True)
class PulseEffect:
    """Exact propagator of one pulse in block form.

    ``free`` acts on the driven pair of the target atom when the other atom is
    not in ``r``; ``blocked`` when it is. ``rr_phase`` multiplies ``|rr>``
    during digital pulses.
    """

    channel: str
    target: int
    free: np.ndarray
    blocked: np.ndarray | None
    rr_phase: complex


def pulse_effects(pulses, dev: DeviceConfig, amp_factors=None, doppler=(0.0, 0.0)) -> list[PulseEffect]:
    """Propagators for many pulses at once.

    Waveforms are padded to a common length with identity samples so the
    time-ordered products run as one vectorised reduction.
    """
    pulses = list(pulses)
    if not pulses:
        return []
    amp_factors = np.ones(len(pulses)) if amp_factors is None else np.asarray(amp_factors, float)
    V = dev.interaction
    rows = []  # (pulse index, blocked?)
    for i, p in enumerate(pulses):
        rows.append((i, False))
        if p.channel == "rydberg":
            rows.append((i, True))
    L = max(len(p.amplitude) for p in pulses)
    omega = np.zeros((len(rows), L))
    delta = np.zeros((len(rows), L))
    shift = np.zeros((len(rows), L))
    phase = np.zeros((len(rows), 1))
    dt = pulses[0].resolution
    for r, (i, blocked) in enumerate(rows):
        p = pulses[i]
        if p.resolution != dt:
            raise ValueError("all pulses must share one resolution")
        n = len(p.amplitude)
        omega[r, :n] = p.amplitude * amp_factors[i]
        delta[r, :n] = p.detuning + doppler[p.target]
        if blocked:
            shift[r, :n] = V
        phase[r, 0] = p.phase
    U = _ordered_product(*_sample_factors(omega, delta, phase, dt, shift))
    out, r = [], 0
    for p in pulses:
        if p.channel == "digital":
            out.append(PulseEffect(p.channel, p.target, U[r], None, np.exp(-1j * V * p.duration)))
            r += 1
        else:
            out.append(PulseEffect(p.channel, p.target, U[r], U[r + 1], 1.0))
            r += 2
    return out


def pulse_effect(p: Pulse, dev: DeviceConfig, amp_factor: float = 1.0, doppler: float = 0.0) -> PulseEffect:
    dop = [0.0, 0.0]
    dop[p.target] = doppler
    return pulse_effects([p], dev, [amp_factor], dop)[0]


def apply_effect(psi: np.ndarray, e: PulseEffect) -> np.ndarray:
    """Apply a pulse propagator to a (3, 3) amplitude array, returning a new array."""
    # view with the target atom on the last axis
    a = psi.copy() if e.target == 0 else psi.T.copy()
    if e.channel == "digital":
        a[:, 0:2] = a[:, 0:2] @ e.free.T
        a[R, R] *= e.rr_phase
    else:
        # columns 0 and 2 are the (g, r) pair of the target
        a[0:2, 0::2] = a[0:2, 0::2] @ e.free.T
        a[R, 0::2] = e.blocked @ a[R, 0::2]
    return a if e.target == 0 else a.T


def apply_frame(psi: np.ndarray, f: FrameShift) -> np.ndarray:
    """``Rz(angle)`` on the qubit of atom ``f.target``; ``r`` follows ``g``."""
    phases = np.exp(np.array([-0.5j, 0.5j, -0.5j]) * f.angle)
    if f.target == 0:
        return psi * phases[None, :]
    return psi * phases[:, None]


def simulate_sequence(
    seq: PulseSequence,
    dev: DeviceConfig | None = None,
    psi0: AtomState | None = None,
    noise=None,
    record: str = "items",
) -> list[AtomState]:
    """Integrate the Schrodinger equation through ``seq``.

    ``noise`` is a :class:`dqpt.noise.NoiseRealization` or ``None``. Its
    amplitude factors scale each pulse and its per-atom Doppler shift adds to
    the detuning of every pulse on that atom. Pulses on unprepared atoms are
    skipped. ``record`` selects the trajectory: ``"final"``
    (last state only), ``"items"`` (after every item) or ``"samples"`` (after
    every waveform sample and every non-pulse item, slow).
    """
    dev = dev or DeviceConfig()
    psi = (psi0 or AtomState.ground()).amplitudes.copy()
    if abs(np.linalg.norm(psi) - 1) > 1e-8:
        raise ValueError("initial atom state is not normalised")
    if record not in ("final", "items", "samples"):
        raise ValueError(f"unknown recording mode {record!r}")
    prepared = (True, True) if noise is None else tuple(noise.atom_prepared)
    doppler = (0.0, 0.0) if noise is None else tuple(noise.doppler_shift)
    traj = [AtomState(psi)] if record != "final" else []
    pulses = seq.pulses
    for p in pulses:
        if abs(p.resolution - dev.resolution) > 1e-15:
            raise ValueError("pulse resolution does not match the device")
    factors = np.ones(len(pulses)) if noise is None else np.asarray(noise.amp_factor, float)
    if len(factors) != len(pulses):
        raise ValueError(f"noise realization has {len(factors)} amplitude factors for {len(pulses)} pulses")
    effects = iter(pulse_effects(pulses, dev, factors, doppler) if record != "samples" else [])
    k = 0
    for it in seq.items:
        if isinstance(it, Pulse):
            factor = factors[k]
            k += 1
            if record == "samples":
                if prepared[it.target]:
                    for j in range(len(it.amplitude)):
                        piece = Pulse(
                            it.channel, it.target, it.amplitude[j : j + 1], it.detuning[j : j + 1],
                            it.phase, it.resolution, it.resolution,
                        )
                        psi = apply_effect(psi, pulse_effect(piece, dev, factor, doppler[it.target]))
                        traj.append(AtomState(psi))
                continue
            effect = next(effects)
            if not prepared[it.target]:
                continue
            psi = apply_effect(psi, effect)
        elif isinstance(it, FrameShift):
            psi = apply_frame(psi, it)
        if record != "final":
            traj.append(AtomState(psi))
    if record == "final":
        traj.append(AtomState(psi))
    return traj


def qubit_populations(state: AtomState) -> np.ndarray:
    """Probabilities of reading ``|q1 q0>`` with ``r`` read as 1 (no readout errors)."""
    p = state.level_probabilities()
    bit = np.array([0, 1, 1])
    out = np.zeros(4)
    for l1 in range(3):
        for l0 in range(3):
            out[2 * bit[l1] + bit[l0]] += p[l1, l0]
    return out


def measure(state: AtomState, shots: int, rng: np.random.Generator, noise=None, prepared=None) -> dict[str, int]:
    """Sample ``shots`` bitstrings ``"q1q0"``; ``noise`` (a NoiseConfig) adds readout flips."""
    from .noise import spam_postprocess

    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = qubit_populations(state)
    counts = rng.multinomial(shots, p / p.sum())
    out = {f"{i >> 1}{i & 1}": int(c) for i, c in enumerate(counts) if c}
    if noise is not None:
        out = spam_postprocess(out, noise, rng, prepared=prepared)
    return out


# --- CZ calibration --------------------------------------------------------


@dataclass(frozen=True)
class CZCalibration:
    """Z corrections that turn the raw blockade block into CZ.

    ``z_control`` and ``z_target`` are ``Rz`` angles applied after the pulses;
    ``conditional_phase`` is the residual two-qubit phase (ideally pi) and
    ``fidelity`` the corrected process fidelity on the qubit subspace.
    """

    z_control: float
    z_target: float
    conditional_phase: float
    fidelity: float
    leakage: float

    def corrections(self, control: int, target: int) -> list[tuple[int, float]]:
        return [(control, self.z_control), (target, self.z_target)]


def raw_cz_block(dev: DeviceConfig, control: int = 1, target: int = 0) -> np.ndarray:
    """Qubit-subspace block (4x4, not unitary if there is leakage) of the CZ pulses."""
    seq = PulseSequence(tuple(cz_pulses(control, target, dev)))
    U = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        psi = np.zeros(4)
        psi[i] = 1
        out = simulate_sequence(seq, dev, AtomState.from_qubits(psi), record="final")[-1]
        U[:, i] = out.qubit_amplitudes()
    return U


@lru_cache(maxsize=32)
def calibrate_cz(dev: DeviceConfig) -> CZCalibration:
    """Fit the single-qubit Z phases of the blockade block on ``dev`` (cached)."""
    U = raw_cz_block(dev, control=1, target=0)
    ph = np.angle(np.diag(U))
    # index 2 q1 + q0 with q1 the control
    z_t = -(ph[1] - ph[0])
    z_c = -(ph[2] - ph[0])
    cond = float((ph[3] - ph[2] - ph[1] + ph[0]) % (2 * pi))
    corrected = on_qubit(1, rz(z_c)) @ on_qubit(0, rz(z_t)) @ U
    fid = float(abs(np.trace(CZ_MATRIX.conj().T @ corrected)) ** 2 / 16)
    leak = float(1 - np.min(np.sum(np.abs(U) ** 2, axis=0)))
    return CZCalibration(float(z_c), float(z_t), cond, fid, leak)


def ideal_cz_check(dev: DeviceConfig) -> float:
    """Process fidelity of the compiled, frame-corrected CZ against diag(1, 1, 1, -1)."""
    seq = compile_to_pulses(Circuit((Gate("CZ", target=0, control=1),)), dev, measure=False)
    U = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        psi = np.zeros(4)
        psi[i] = 1
        U[:, i] = simulate_sequence(seq, dev, AtomState.from_qubits(psi), record="final")[-1].qubit_amplitudes()
    return float(abs(np.trace(CZ_MATRIX.conj().T @ U)) ** 2 / 16)


def sequence_qubit_unitary(seq: PulseSequence, dev: DeviceConfig | None = None, noise=None) -> np.ndarray:
    """Qubit-subspace block of the whole sequence (columns are evolved basis states)."""
    dev = dev or DeviceConfig()
    U = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        psi = np.zeros(4)
        psi[i] = 1
        U[:, i] = simulate_sequence(seq, dev, AtomState.from_qubits(psi), noise, record="final")[-1].qubit_amplitudes()
    return U


__all__ = [
    "AtomState", "CZCalibration", "DeviceConfig", "FrameShift", "Measure", "Pulse",
    "PulseEffect", "PulseSequence", "apply_effect", "apply_frame", "blackman_waveform",
    "blockade_radius", "calibrate_cz", "compile_to_pulses", "cz_pulses", "ideal_cz_check",
    "measure", "minimal_duration", "pulse_effect", "qubit_populations", "raw_cz_block",
    "sequence_qubit_unitary", "simulate_sequence",
]
