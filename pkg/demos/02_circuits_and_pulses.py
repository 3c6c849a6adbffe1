# %% [markdown]
# # From Trotter circuits to neutral-atom pulses
#
# The four even-parity states are encoded on two qubits. A second-order
# Trotter circuit approximates the evolution, any number of steps then
# collapses to a three-CNOT circuit, and that circuit compiles to Blackman
# pulses on a two-atom register.

# %%
import numpy as np

from dqpt.circuit import circuit_unitary, pauli_decompose, phase_invariant_distance, trotter_circuit
from dqpt.cli import Scenario, circuit_populations, exact_populations, pulse_populations
from dqpt.model import block_hamiltonian
from dqpt.pulse import DeviceConfig, Pulse, calibrate_cz, compile_to_pulses
from dqpt.synthesis import compress, virtualize_z

s = Scenario("case1", n_trotter_steps=125, dt_rescaled=0.1)
coeffs = pauli_decompose(block_hamiltonian(s.xi, s.mu))
print({k: round(v, 4) for k, v in coeffs.items() if abs(v) > 1e-12})

# %% [markdown]
# Composing 91 steps and compressing them gives a short circuit with the same
# unitary up to a global phase.

# %%
dt_gate = s.dt_rescaled * s.g_over_j**2 / np.sqrt(s.m_over_j**2 + 1)
long = trotter_circuit(s.xi, s.mu, dt_gate, 91)
short = compress(long)
print(f"{len(long)} gates -> {len(short)} gates, {short.count('CNOT')} CNOTs")
native = virtualize_z(short)
print(f"native form: {native.count('CZ')} CZ, {native.count('RX')} RX, Z rotations kept as frames")
print(f"unitary distance: {phase_invariant_distance(circuit_unitary(long), circuit_unitary(short)):.1e}")

# %% [markdown]
# Pulse compilation: Z rotations become frame shifts and each CZ becomes a
# pi / 2pi / pi blockade pattern on the Rydberg channel.

# %%
dev = DeviceConfig()
seq = compile_to_pulses(short, dev)
pulses = [p for p in seq.items if isinstance(p, Pulse)]
print(f"{len(pulses)} pulses, total duration {sum(p.duration for p in pulses):.3f} us")
print(f"calibrated CZ fidelity: {calibrate_cz(dev).fidelity:.4f}")

# %% [markdown]
# Exact, circuit and pulse populations of the initial state agree closely.

# %%
exact, circ, puls = exact_populations(s), circuit_populations(s), pulse_populations(s)
print(f"max |circuit - exact| = {np.abs(circ - exact).max():.4f}")
print(f"max |pulse - circuit| = {np.abs(puls - circ).max():.4f}")
