"""Dynamical quantum phase transitions in a Z_3 lattice gauge model, from exact
quench dynamics down to Rydberg-atom pulse sequences."""
from .circuit import Circuit, Gate, circuit_unitary, pauli_decompose, simulate_circuit, trotter_step
from .model import GaugeConfig, block_hamiltonian, build_gauge_hamiltonian, enumerate_physical_basis
from .noise import EnsembleStats, NoiseConfig, NoiseRealization, monte_carlo, sample_realization
from .pulse import DeviceConfig, PulseSequence, compile_to_pulses, simulate_sequence
from .quench import QuenchSpec, evolve_exact, loschmidt_series, scan_zero_loci
from .synthesis import compress, virtualize_z

__version__ = "0.1.0"
