"""Two-qubit gate IR, Trotter steps for the even-parity block, and an ideal simulator.

Qubit ordering is little-endian: basis index ``2*q1 + q0`` and the first
tensor factor is qubit 1. The even-parity states map as
``psi_1+ -> |00>, psi_2+ -> |01>, psi_3+ -> |10>, psi_4+ -> |11>``.

Rotation conventions: ``R_P(theta) = exp(-i theta P / 2)``; the phase gate is
``diag(1, e^{i theta})``. An ``RX`` gate may carry an azimuthal ``phase`` and
then means ``exp(-i theta/2 (cos(phase) X - sin(phase) Y))``, i.e. a rotation
about an axis in the XY plane.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from math import pi, sqrt
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / sqrt(2)
PAULIS = {"1": I2, "X": X, "Y": Y, "Z": Z}

GATE_KINDS = ("RX", "RY", "RZ", "VirtualZ", "Hadamard", "Phase", "CZ", "CNOT", "U1q", "U2q")
ONE_QUBIT = {"RX", "RY", "RZ", "VirtualZ", "Hadamard", "Phase", "U1q"}


def rx(theta: float, phase: float = 0.0) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [[c, -1j * s * np.exp(1j * phase)], [-1j * s * np.exp(-1j * phase), c]],
        dtype=complex,
    )


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def phase_gate(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)])


def on_qubit(q: int, u: np.ndarray) -> np.ndarray:
    """Embed a one-qubit matrix acting on qubit ``q`` into the 4x4 space."""
    return np.kron(u, I2) if q == 1 else np.kron(I2, u)


def cnot_matrix(control: int, target: int) -> np.ndarray:
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    return on_qubit(control, p0) + on_qubit(control, p1) @ on_qubit(target, X)


CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


@dataclass(frozen=True, eq=False)
class Gate:
    kind: str
    target: int
    angle: float = 0.0
    control: int | None = None
    phase: float = 0.0
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if not np.isfinite(self.angle) or not np.isfinite(self.phase):
            raise ValueError(f"non-finite angle on {self.kind}")
        if self.kind in ("CZ", "CNOT") and self.control is None:
            raise ValueError(f"{self.kind} needs a control qubit")
        if self.kind in ("U1q", "U2q"):
            if self.matrix is None:
                raise ValueError(f"{self.kind} needs an explicit matrix")
            m = np.asarray(self.matrix, dtype=complex)
            dim = 2 if self.kind == "U1q" else 4
            if m.shape != (dim, dim):
                raise ValueError(f"{self.kind} matrix must be {dim}x{dim}")
            if np.abs(m.conj().T @ m - np.eye(dim)).max() > 1e-10:
                raise ValueError(f"{self.kind} matrix is not unitary")
            object.__setattr__(self, "matrix", m)

    def _key(self):
        return (self.kind, self.target, self.angle, self.control, self.phase)

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        if self._key() != other._key():
            return False
        if self.matrix is None or other.matrix is None:
            return self.matrix is None and other.matrix is None
        return bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash(self._key())

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)

    def local_matrix(self) -> np.ndarray:
        """Matrix on the gate's own qubit (one-qubit kinds only)."""
        k = self.kind
        if k == "RX":
            return rx(self.angle, self.phase)
        if k == "RY":
            return ry(self.angle)
        if k in ("RZ", "VirtualZ"):
            return rz(self.angle)
        if k == "Hadamard":
            return HADAMARD
        if k == "Phase":
            return phase_gate(self.angle)
        if k == "U1q":
            return self.matrix
        raise ValueError(f"{k} is not a one-qubit gate")

    def full_matrix(self) -> np.ndarray:
        if self.kind in ONE_QUBIT:
            return on_qubit(self.target, self.local_matrix())
        if self.kind == "CNOT":
            return cnot_matrix(self.control, self.target)
        if self.kind == "CZ":
            return CZ_MATRIX
        if self.kind == "U2q":
            return self.matrix
        raise AssertionError(self.kind)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "angle": self.angle, "target": self.target, "control": self.control}
        if self.phase:
            d["phase"] = self.phase
        if self.matrix is not None:
            d["matrix"] = [[[z.real, z.imag] for z in row] for row in self.matrix]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        matrix = d.get("matrix")
        if matrix is not None:
            matrix = np.array([[complex(re, im) for re, im in row] for row in matrix])
        return cls(
            kind=d["kind"],
            target=d["target"],
            angle=d.get("angle", 0.0),
            control=d.get("control"),
            phase=d.get("phase", 0.0),
            matrix=matrix,
        )


@dataclass(frozen=True)
class Circuit:
    """Ordered gate program on two qubits.

    ``global_phase`` multiplies the unitary. ``boundaries`` lists gate counts at
    which a Trotter step ends, so simulations can report per-step states.
    ``metadata`` holds bookkeeping such as a dropped identity-term phase.
    """

    gates: tuple[Gate, ...] = ()
    n_qubits: int = 2
    global_phase: float = 0.0
    boundaries: tuple[int, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits != 2:
            raise ValueError("only two-qubit circuits are supported")
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g.kind} addresses a qubit outside [0, {self.n_qubits})")

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def then(self, other: "Circuit") -> "Circuit":
        """Run ``self`` followed by ``other``."""
        offset = len(self.gates)
        return Circuit(
            self.gates + other.gates,
            global_phase=self.global_phase + other.global_phase,
            boundaries=self.boundaries + tuple(b + offset for b in other.boundaries),
            metadata=dict(self.metadata),
        )

    def repeat(self, k: int) -> "Circuit":
        """``k`` copies back to back, with a step boundary after each copy."""
        n = len(self.gates)
        meta = dict(self.metadata)
        if "dropped_identity_phase" in meta:
            meta["dropped_identity_phase"] *= k
        return Circuit(
            self.gates * k,
            global_phase=self.global_phase * k,
            boundaries=tuple(n * (i + 1) for i in range(k)),
            metadata=meta,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "n_qubits": self.n_qubits,
                "global_phase": self.global_phase,
                "boundaries": list(self.boundaries),
                "metadata": self.metadata,
                "gates": [g.to_dict() for g in self.gates],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        d = json.loads(text)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported circuit schema version {d.get('schema_version')}")
        return cls(
            tuple(Gate.from_dict(g) for g in d["gates"]),
            n_qubits=d["n_qubits"],
            global_phase=d.get("global_phase", 0.0),
            boundaries=tuple(d.get("boundaries", ())),
            metadata=d.get("metadata", {}),
        )


def circuit_unitary(c: Circuit | Iterable[Gate]) -> np.ndarray:
    """Ordered product of gate matrices (first gate acts first)."""
    gates = c.gates if isinstance(c, Circuit) else tuple(c)
    U = np.eye(4, dtype=complex)
    cache: dict[Gate, np.ndarray] = {}
    for g in gates:
        m = cache.get(g)
        if m is None:
            m = cache[g] = g.full_matrix()
        U = m @ U
    if isinstance(c, Circuit) and c.global_phase:
        U = U * np.exp(1j * c.global_phase)
    return U


def phase_invariant_distance(A: np.ndarray, B: np.ndarray) -> float:
    """``d - |Tr(A^dagger B)|``: zero iff ``A`` and ``B`` agree up to global phase."""
    return float(A.shape[0] - abs(np.trace(A.conj().T @ B)))


def simulate_circuit(c: Circuit, psi0: np.ndarray, at: str = "gates") -> list[np.ndarray]:
    """States along the circuit.

    ``at="gates"`` returns the state after every gate, ``at="boundaries"`` only
    at the circuit's step boundaries (``psi0`` first in both cases).
    """
    psi = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ValueError("initial state is not normalised")
    if at not in ("gates", "boundaries"):
        raise ValueError(f"unknown recording mode {at!r}")
    phase = np.exp(1j * c.global_phase / max(len(c.gates), 1))
    marks = set(c.boundaries)
    out = [psi]
    for i, g in enumerate(c.gates, start=1):
        psi = phase * (g.full_matrix() @ psi)
        if at == "gates" or i in marks:
            out.append(psi)
    return out


# --- Pauli decomposition -------------------------------------------------

PAULI_LABELS = tuple(a + b for a in "1XYZ" for b in "1XYZ")


def pauli_basis_element(label: str) -> np.ndarray:
    """``G_kl = P_k (x) P_l / 2``."""
    return np.kron(PAULIS[label[0]], PAULIS[label[1]]) / 2


def pauli_decompose(H: np.ndarray) -> dict[str, float]:
    """Coefficients ``Tr(G_kl H)`` so that ``H = sum_kl c_kl G_kl``.

    Returned as a mapping from two-letter label (``"1X"`` is ``1 (x) X``) to the
    real coefficient; in terms of bare Pauli strings the weight is ``c_kl / 2``.
    """
    H = np.asarray(H, dtype=complex)
    if H.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {H.shape}")
    if np.abs(H - H.conj().T).max() > 1e-12:
        raise ValueError("matrix is not Hermitian")
    return {lab: float(np.trace(pauli_basis_element(lab) @ H).real) for lab in PAULI_LABELS}


def pauli_reconstruct(coeffs: dict[str, float]) -> np.ndarray:
    return sum(c * pauli_basis_element(lab) for lab, c in coeffs.items())


# --- Trotter steps ---------------------------------------------------------


def _hopping_zz_block(xi: float, dt: float) -> list[Gate]:
    """``exp(-i[(xi dt/4)(XX+YY) - (pi dt/12) ZZ])`` as a CNOT/H/P/CZ sandwich.

    Qubit 1 is the CNOT control. Exact up to global phase (which is 1 here).
    """
    a = xi * dt / 2
    return [
        Gate("CNOT", target=0, control=1),
        Gate("RZ", target=0, angle=-pi * dt / 6),
        Gate("CZ", target=1, control=0),
        Gate("Hadamard", target=1),
        Gate("Phase", target=1, angle=-a),
        Gate("Hadamard", target=1),
        Gate("CZ", target=1, control=0),
        Gate("Hadamard", target=1),
        Gate("Phase", target=1, angle=a),
        Gate("Hadamard", target=1),
        Gate("CNOT", target=0, control=1),
    ]


def _single_qubit_layer(xi: float, mu: float, dt: float) -> list[Gate]:
    """``exp(-i dt [xi/sqrt2 (1 X) - pi/4 (Z 1) - (pi/12 + mu)(1 Z)])``, Z terms first."""
    return [
        Gate("RZ", target=0, angle=-(pi / 6 + 2 * mu) * dt),
        Gate("RZ", target=1, angle=-pi * dt / 2),
        Gate("RX", target=0, angle=sqrt(2) * xi * dt),
    ]


def _z_layer(mu: float, dt: float) -> list[Gate]:
    return [
        Gate("RZ", target=0, angle=-(pi / 6 + 2 * mu) * dt),
        Gate("RZ", target=1, angle=-pi * dt / 2),
    ]


def trotter_step(xi: float, mu: float, dt: float, order: int = 2) -> Circuit:
    """One Trotter step of ``exp(-i H+ dt)`` with the identity term dropped.

    ``order=1`` is the plain product (entangling block, then the single-qubit
    layer). ``order=2`` is the symmetric splitting
    ``Z(dt/2) X(dt/2) [XX+YY, ZZ](dt) X(dt/2) Z(dt/2)``, still with a single
    entangling block. The dropped ``5 pi/12`` identity phase is stored in
    ``metadata["dropped_identity_phase"]``.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if order == 1:
        gates = _hopping_zz_block(xi, dt) + _single_qubit_layer(xi, mu, dt)
    elif order == 2:
        half_x = Gate("RX", target=0, angle=sqrt(2) * xi * dt / 2)
        gates = (
            _z_layer(mu, dt / 2)
            + [half_x]
            + _hopping_zz_block(xi, dt)
            + [half_x]
            + _z_layer(mu, dt / 2)
        )
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return Circuit(
        tuple(gates),
        boundaries=(len(gates),),
        metadata={"dropped_identity_phase": -5 * pi / 12 * dt},
    )


def trotter_circuit(xi: float, mu: float, dt: float, steps: int, order: int = 2) -> Circuit:
    return trotter_step(xi, mu, dt, order).repeat(steps)


def trotter_split_unitary(xi: float, mu: float, dt: float, order: int = 2) -> np.ndarray:
    """Reference product of term exponentials, independent of the gate identities."""
    from scipy.linalg import expm

    a = xi / 4 * (np.kron(X, X) + np.kron(Y, Y)) - pi / 12 * np.kron(Z, Z)
    b = xi * sqrt(2) / 2 * np.kron(I2, X)
    c = -pi / 4 * np.kron(Z, I2) - (pi / 12 + mu) * np.kron(I2, Z)
    if order == 1:
        return expm(-1j * b * dt) @ expm(-1j * c * dt) @ expm(-1j * a * dt)
    first = expm(-1j * b * dt / 2) @ expm(-1j * c * dt / 2)
    last = expm(-1j * c * dt / 2) @ expm(-1j * b * dt / 2)
    return last @ expm(-1j * a * dt) @ first


def encoded_initial_state(index: int = 0) -> np.ndarray:
    """Computational basis state encoding ``psi_{index+1}+``."""
    psi = np.zeros(4, dtype=complex)
    psi[index] = 1.0
    return psi


def populations(states: Sequence[np.ndarray]) -> np.ndarray:
    return np.abs(np.asarray(states)) ** 2
