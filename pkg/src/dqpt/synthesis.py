"""Two-qubit synthesis: KAK decomposition, minimal-CNOT compression, Euler angles
and virtual-Z frame tracking.

The KAK route goes through the magic basis, where local gates become real
orthogonal matrices and the non-local content is a diagonal phase matrix.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import pi

import numpy as np

from .circuit import (
    Circuit,
    Gate,
    Y,
    circuit_unitary,
    phase_invariant_distance,
    rx,
    rz,
)

MAGIC = np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex
) / np.sqrt(2)
YY = np.kron(Y, Y)

EQUIV_TOL = 1e-9


@dataclass(frozen=True)
class KAK:
    """``U = exp(i phase) (k1a (x) k1b) exp(i(a XX + b YY + c ZZ)) (k2a (x) k2b)``."""

    phase: float
    k1: tuple[np.ndarray, np.ndarray]
    coords: tuple[float, float, float]
    k2: tuple[np.ndarray, np.ndarray]

    def unitary(self) -> np.ndarray:
        return (
            np.exp(1j * self.phase)
            * np.kron(*self.k1)
            @ canonical_gate(*self.coords)
            @ np.kron(*self.k2)
        )


def canonical_gate(a: float, b: float, c: float) -> np.ndarray:
    """``exp(i(a XX + b YY + c ZZ))``, diagonal in the magic basis."""
    theta = np.array([a - b + c, a + b - c, -a - b - c, -a + b + c])
    return MAGIC @ np.diag(np.exp(1j * theta)) @ MAGIC.conj().T


def to_special_unitary(U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    return U / np.linalg.det(U) ** (1 / U.shape[0])


def split_local(L: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Factor a 4x4 local unitary into ``a (x) b`` with ``a, b`` in SU(2) up to a shared phase."""
    R = L.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(R)
    if s[1] > tol * s[0]:
        raise ValueError(f"matrix is not a tensor product (second singular value {s[1]:.2e})")
    a = np.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    b = np.sqrt(s[0]) * vh[0].reshape(2, 2)
    da = np.linalg.det(a)
    a = a / np.sqrt(da)
    b = b * np.sqrt(da)
    return a, b


def _magic_factor(U: np.ndarray):
    """``M^dag U M = K1 diag(f) K2`` with ``K1, K2`` in SO(4) and ``prod f = 1``."""
    Up = MAGIC.conj().T @ to_special_unitary(U) @ MAGIC
    A = Up.T @ Up
    rng = np.random.default_rng(1234)
    for _ in range(10):
        r = rng.uniform(0.5, 2.0)
        _, O = np.linalg.eigh(A.real + r * A.imag)
        D = O.T @ A @ O
        if np.abs(D - np.diag(np.diag(D))).max() < 1e-10:
            break
    else:
        raise RuntimeError("failed to diagonalise the magic-basis symmetric form")
    if np.linalg.det(O) < 0:
        O[:, 0] *= -1
    half = np.angle(np.diag(D)) / 2
    f = np.exp(1j * half)
    if np.real(np.prod(f)) < 0:
        f[0] *= -1
    K1 = Up @ O @ np.diag(f.conj())
    if np.abs(K1.imag).max() > 1e-8:
        raise RuntimeError("magic-basis factor is not real")
    return K1.real, f, O.T


def kak_decompose(U: np.ndarray) -> KAK:
    K1, f, K2 = _magic_factor(U)
    theta = np.angle(f)
    a = (theta[0] + theta[1]) / 2
    b = (theta[1] + theta[3]) / 2
    c = (theta[0] + theta[3]) / 2
    k1 = split_local(MAGIC @ K1 @ MAGIC.conj().T)
    k2 = split_local(MAGIC @ K2 @ MAGIC.conj().T)
    core = np.kron(*k1) @ canonical_gate(a, b, c) @ np.kron(*k2)
    phase = float(np.angle(np.trace(core.conj().T @ np.asarray(U, dtype=complex))))
    return KAK(phase, k1, (float(a), float(b), float(c)), k2)


def local_equivalence(U: np.ndarray, T: np.ndarray):
    """Find locals with ``U ~ L T R`` (equality up to global phase).

    Returns ``(L, R)`` as 4x4 matrices, or ``None`` if the two are not locally
    equivalent.
    """
    K1u, fu, K2u = _magic_factor(U)
    K1t, ft, K2t = _magic_factor(T)
    for k in range(4):
        target = fu * (1j) ** k
        for perm in itertools.permutations(range(4)):
            ratio = target / ft[list(perm)]
            if np.abs(np.abs(ratio.real) - 1).max() > 1e-7 or np.abs(ratio.imag).max() > 1e-7:
                continue
            S = np.diag(np.sign(ratio.real))
            P = np.zeros((4, 4))
            P[np.arange(4), perm] = 1.0
            Q = P.copy()
            if np.linalg.det(P) < 0:
                Q = P @ np.diag([-1.0, 1, 1, 1])
            SQ = S @ Q
            if np.linalg.det(SQ) < 0:
                continue
            L = MAGIC @ (K1u @ SQ @ K1t.T) @ MAGIC.conj().T
            R = MAGIC @ (K2t.T @ Q.T @ K2u) @ MAGIC.conj().T
            if phase_invariant_distance(U, L @ T @ R) < EQUIV_TOL:
                return L, R
    return None


def cnot_count(U: np.ndarray) -> int:
    """Minimal number of CNOTs needed for ``U`` (0 to 3)."""
    Us = to_special_unitary(U)
    gamma = Us @ YY @ Us.T @ YY
    tr = np.trace(gamma)
    if np.allclose(gamma, np.eye(4), atol=1e-7) or np.allclose(gamma, -np.eye(4), atol=1e-7):
        return 0
    if abs(tr) < 1e-7 and np.allclose(gamma @ gamma, -np.eye(4), atol=1e-7):
        return 1
    # the overall sign of gamma depends on the det branch; a real polynomial stays real
    if np.abs(np.poly(gamma).imag).max() < 1e-7:
        return 2
    return 3


def _three_cnot_template(a: float, b: float, c: float) -> tuple[np.ndarray, list[Gate]]:
    t1, t2, t3 = pi / 2 - 2 * c, 2 * a - pi / 2, pi / 2 - 2 * b
    gates = [
        Gate("CNOT", target=1, control=0),
        Gate("RY", target=0, angle=t3),
        Gate("CNOT", target=0, control=1),
        Gate("RZ", target=1, angle=t1),
        Gate("RY", target=0, angle=t2),
        Gate("CNOT", target=1, control=0),
    ]
    return circuit_unitary(gates), gates


def _two_cnot_template(alpha: float, beta: float) -> tuple[np.ndarray, list[Gate]]:
    gates = [
        Gate("CNOT", target=0, control=1),
        Gate("RX", target=1, angle=alpha),
        Gate("RZ", target=0, angle=beta),
        Gate("CNOT", target=0, control=1),
    ]
    return circuit_unitary(gates), gates


def _templates(U: np.ndarray, n_cnot: int):
    if n_cnot == 1:
        yield circuit_unitary([Gate("CNOT", target=0, control=1)]), [Gate("CNOT", target=0, control=1)]
        return
    _, f, _ = _magic_factor(U)
    for k in range(4):
        th = np.angle(f * (1j) ** k)
        if n_cnot == 3:
            a = (th[0] + th[1]) / 2
            b = (th[1] + th[3]) / 2
            c = (th[0] + th[3]) / 2
            yield _three_cnot_template(a, b, c)
        else:
            # Can(x, 0, z) has phases {x+z, x-z, -(x+z), -(x-z)}
            for j in range(1, 4):
                rest = [i for i in range(1, 4) if i != j]
                s, d = th[0], th[rest[0]]
                x, z = (s + d) / 2, (s - d) / 2
                yield _two_cnot_template(-2 * x, -2 * z)


def _local_gates(L: np.ndarray) -> list[Gate]:
    a, b = split_local(L)
    return [Gate("U1q", target=1, matrix=a), Gate("U1q", target=0, matrix=b)]


def synthesize_two_qubit(U: np.ndarray) -> tuple[list[Gate], int]:
    """Gate list reproducing ``U`` up to global phase, using the minimal CNOT count.

    Returns the gates and the number of CNOTs used.
    """
    U = np.asarray(U, dtype=complex)
    n = cnot_count(U)
    if n == 0:
        try:
            return _local_gates(to_special_unitary(U)), 0
        except ValueError:
            n = 1
    for count in range(max(n, 1), 4):
        for T, gates in _templates(U, count):
            found = local_equivalence(U, T)
            if found is None:
                continue
            L, R = found
            return _local_gates(R) + gates + _local_gates(L), count
    raise RuntimeError("two-qubit synthesis failed for all templates")


# --- single-qubit Euler angles --------------------------------------------


def zxz_angles(U: np.ndarray) -> tuple[float, float, float, float]:
    """``U = exp(i g) Rz(phi) Rx(theta) Rz(lam)``; returns ``(lam, theta, phi, g)``.

    In time order the rotations are ``Rz(lam)``, ``Rx(theta)``, ``Rz(phi)``.
    """
    U = np.asarray(U, dtype=complex)
    det = np.linalg.det(U)
    V = U / np.sqrt(det)
    theta = 2 * np.arctan2(abs(V[1, 0]), abs(V[0, 0]))
    plus = 2 * np.angle(V[1, 1]) if abs(V[1, 1]) > 1e-12 else 0.0
    minus = 2 * np.angle(V[1, 0]) if abs(V[1, 0]) > 1e-12 else 0.0
    # ZYZ: V = Rz(p) Ry(theta) Rz(l) with p + l = plus, p - l = minus
    p, l = (plus + minus) / 2, (plus - minus) / 2
    lam, phi = l - pi / 2, p + pi / 2
    core = rz(phi) @ rx(theta) @ rz(lam)
    g = float(np.angle(np.trace(core.conj().T @ U) / 2))
    return float(lam), float(theta), float(phi), g


def _wrap(angle: float) -> float:
    return float((angle + pi) % (2 * pi) - pi)


def _is_trivial(angle: float, tol: float = 1e-12) -> bool:
    return abs(_wrap(angle)) < tol


def euler_gates(U: np.ndarray, q: int) -> tuple[list[Gate], float]:
    """ZXZ gate list for a one-qubit unitary on qubit ``q``, plus its global phase."""
    lam, theta, phi, _ = zxz_angles(U)
    out = [
        Gate(kind, target=q, angle=_wrap(ang))
        for kind, ang in (("RZ", lam), ("RX", theta), ("RZ", phi))
        if not _is_trivial(ang)
    ]
    V = np.eye(2, dtype=complex)
    for g in out:
        V = g.local_matrix() @ V
    return out, float(np.angle(np.trace(V.conj().T @ U)))


def _fuse_single_qubit(gates: list[Gate]) -> tuple[list[Gate], float]:
    """Merge runs of one-qubit gates and re-express them as ZXZ rotations."""
    out: list[Gate] = []
    pending = {0: np.eye(2, dtype=complex), 1: np.eye(2, dtype=complex)}
    touched = {0: False, 1: False}
    phase = 0.0

    def flush(q):
        nonlocal phase
        if touched[q]:
            gs, ph = euler_gates(pending[q], q)
            out.extend(gs)
            phase += ph
            pending[q] = np.eye(2, dtype=complex)
            touched[q] = False

    for g in gates:
        if len(g.qubits) == 1:
            pending[g.target] = g.local_matrix() @ pending[g.target]
            touched[g.target] = True
        else:
            flush(0)
            flush(1)
            out.append(g)
    flush(0)
    flush(1)
    return out, phase


def synthesize_circuit(U: np.ndarray, metadata: dict | None = None) -> Circuit:
    """Circuit with at most three CNOTs and fused ZXZ rotations equal to ``U`` (phase included)."""
    U = np.asarray(U, dtype=complex)
    if U.shape != (4, 4):
        raise ValueError(f"expected a 4x4 unitary, got shape {U.shape}")
    defect = np.abs(U.conj().T @ U - np.eye(4)).max()
    if defect > 1e-9:
        raise ValueError(
            f"accumulated matrix is not unitary (max |U^dag U - 1| = {defect:.2e}, "
            f"condition number {np.linalg.cond(U):.6g})"
        )
    raw, _ = synthesize_two_qubit(U)
    fused, _ = _fuse_single_qubit(raw)
    V = circuit_unitary(fused)
    phase = float(np.angle(np.trace(V.conj().T @ U)))
    return Circuit(tuple(fused), global_phase=phase, metadata=dict(metadata or {}))


def compress(circuit: Circuit, per_step: bool = False) -> Circuit:
    """Resynthesize a circuit from its net unitary with at most three CNOTs.

    By default the whole circuit collapses into one block, so the depth does
    not grow with the number of Trotter steps. With ``per_step=True`` each
    segment between ``circuit.boundaries`` is resynthesized separately and the
    boundaries are kept (identical segments are synthesized once).
    """
    if circuit.n_qubits != 2:
        raise ValueError("compression is only defined for two qubits")
    if per_step and circuit.boundaries:
        marks = list(circuit.boundaries)
        if marks[-1] != len(circuit.gates):
            marks.append(len(circuit.gates))
    else:
        marks = [len(circuit.gates)]
    cache: dict[bytes, tuple[list[Gate], float]] = {}
    gates: list[Gate] = []
    boundaries = []
    phase = circuit.global_phase
    start = 0
    for end in marks:
        U = circuit_unitary(circuit.gates[start:end])
        key = np.round(U, 12).tobytes()
        if key not in cache:
            sub = synthesize_circuit(U)
            cache[key] = (list(sub.gates), sub.global_phase)
        seg, seg_phase = cache[key]
        gates.extend(seg)
        phase += seg_phase
        boundaries.append(len(gates))
        start = end
    meta = dict(circuit.metadata)
    meta["compressed"] = True
    if not per_step:
        meta["composed_steps"] = len(circuit.boundaries) or 1
    return Circuit(
        tuple(gates),
        global_phase=phase,
        boundaries=tuple(boundaries) if per_step and circuit.boundaries else (),
        metadata=meta,
    )


# --- virtual Z ----------------------------------------------------------------


def _native_expansion(g: Gate) -> tuple[list[Gate], float]:
    """Rewrite a gate into RX (with phase), RZ and CZ; return the gates and a global phase."""
    if g.kind in ("RX", "RZ", "CZ"):
        return [g], 0.0
    if g.kind == "VirtualZ":
        return [Gate("RZ", target=g.target, angle=g.angle)], 0.0
    if g.kind == "RY":
        return [Gate("RX", target=g.target, angle=g.angle, phase=-pi / 2)], 0.0
    if g.kind == "CNOT":
        h = Gate("Hadamard", target=g.target)
        out, phase = [], 0.0
        for sub in (h, Gate("CZ", target=g.target, control=g.control), h):
            gs, ph = _native_expansion(sub)
            out += gs
            phase += ph
        return out, phase
    if g.kind in ("Hadamard", "Phase", "U1q"):
        gs, ph = euler_gates(g.local_matrix(), g.target)
        return gs, ph
    if g.kind == "U2q":
        raise ValueError("U2q gates must be compressed before virtualising Z rotations")
    raise AssertionError(g.kind)


def virtualize_z(circuit: Circuit) -> Circuit:
    """Express the circuit in {RX(theta, phase), CZ} plus trailing VirtualZ frames.

    Each Z rotation is commuted to the end: past CZ unchanged, past an XY-plane
    rotation by shifting that rotation's phase. The accumulated frame is
    emitted as ``VirtualZ`` gates at the end; it does not affect Z-basis
    populations. Step boundaries are preserved.
    """
    marks = set(circuit.boundaries)
    frame = {0: 0.0, 1: 0.0}
    out: list[Gate] = []
    boundaries = []
    phase = circuit.global_phase
    for i, g in enumerate(circuit.gates, start=1):
        native, ph = _native_expansion(g)
        phase += ph
        for n in native:
            if n.kind == "RZ":
                frame[n.target] += n.angle
            elif n.kind == "RX":
                out.append(
                    Gate("RX", target=n.target, angle=n.angle, phase=_wrap(n.phase + frame[n.target]))
                )
            else:
                out.append(n)
        if i in marks:
            boundaries.append(len(out))
    for q in (1, 0):
        if not _is_trivial(frame[q]):
            wrapped = _wrap(frame[q])
            out.append(Gate("VirtualZ", target=q, angle=wrapped))
            phase += float(np.angle(np.exp(-0.5j * (frame[q] - wrapped))))
    if boundaries:
        boundaries[-1] = len(out)
    meta = dict(circuit.metadata)
    meta["virtual_z"] = True
    return Circuit(tuple(out), global_phase=phase, boundaries=tuple(boundaries), metadata=meta)
