import itertools
from math import comb, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqpt.model import (
    GaugeConfig,
    PhysicalState,
    block_hamiltonian,
    build_gauge_hamiltonian,
    electric_field_value,
    enumerate_physical_basis,
    meson_state,
    odd_block_hamiltonian,
    parity_operator_n2,
    parity_rotation_matrix,
    parity_rotation_n2,
    satisfies_gauss_law,
    vacuum_state,
)

# --- brute-force oracle: operators on the full site x link tensor space -----

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |down> -> |up>, empties a site
SIGMA_MINUS = SIGMA_PLUS.T.copy()
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


def _embed(ops: dict[int, np.ndarray], dims: list[int]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for i, d in enumerate(dims):
        out = np.kron(out, ops.get(i, np.eye(d)))
    return out


def full_space_hamiltonian(n: int, N: int, xi: float, mu: float) -> np.ndarray:
    """Spin Hamiltonian on (2^N sites) x (n^N links); factors ordered sites then links."""
    dims = [2] * N + [n] * N
    U = np.roll(np.eye(n), 1, axis=0).astype(complex)  # U|k> = |k+1 mod n>
    E = np.diag([electric_field_value(k, n) for k in range(n)]).astype(complex)
    H = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
    for x in range(N):
        y = (x + 1) % N
        hop = _embed({x: SIGMA_MINUS, y: SIGMA_PLUS, N + x: U}, dims)
        H += xi * (hop + hop.conj().T)
        H += -mu * (-1) ** x * _embed({x: PAULI_Z}, dims)
        H += _embed({N + x: E @ E}, dims)
    return H / 2


def full_space_index(s: PhysicalState, n: int) -> int:
    digits = [(o, 2) for o in s.occupations] + [(k, n) for k in s.field_indices]
    idx = 0
    for d, base in digits:
        idx = idx * base + d
    return idx


def brute_force_basis(n: int, N: int) -> set[PhysicalState]:
    """Every product state that is neutral and obeys Gauss's law at each site."""
    out = set()
    for occ in itertools.product((0, 1), repeat=N):
        if sum(occ) != N // 2:
            continue
        for k in itertools.product(range(n), repeat=N):
            charges = [occ[x] - (x % 2) for x in range(N)]
            if all((k[x] - k[x - 1] - charges[x]) % n == 0 for x in range(N)):
                out.add(PhysicalState(tuple(occ), tuple(k)))
    return out


# --- basis -------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("N", [2, 4])
def test_basis_size_law_matches_brute_force_filter(n, N):
    basis = enumerate_physical_basis(GaugeConfig(n=n, N=N))
    assert len(basis) == n * comb(N, N // 2)
    assert set(basis) == brute_force_basis(n, N)
    assert len(set(basis)) == len(basis)


def test_n2_four_site_basis_has_twelve_states():
    assert len(enumerate_physical_basis(GaugeConfig(n=2, N=4))) == 12


def test_canonical_order_for_two_site_z3():
    basis = enumerate_physical_basis(GaugeConfig(n=3, N=2))
    expected = [vacuum_state(0), meson_state(0), vacuum_state(1), meson_state(1), vacuum_state(2), meson_state(2)]
    assert list(basis) == expected
    for s in basis:
        assert satisfies_gauss_law(s, 3)


def test_canonical_order_is_sorted_elsewhere():
    basis = enumerate_physical_basis(GaugeConfig(n=4, N=4))
    keys = [(s.field_indices, s.occupations) for s in basis]
    assert keys == sorted(keys)


def test_gauss_law_rejects_inconsistent_state():
    assert not satisfies_gauss_law(PhysicalState((0, 1), (0, 1)), 3)


def test_electric_field_values():
    assert electric_field_value(1, 3) == 0.0
    assert electric_field_value(0, 3) == pytest.approx(-sqrt(2 * pi / 3))
    assert electric_field_value(2, 3) == pytest.approx(sqrt(2 * pi / 3))
    with pytest.raises(ValueError):
        electric_field_value(3, 3)


@pytest.mark.parametrize("kw", [{"n": 1}, {"N": 3}, {"N": 0}, {"J": 0.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GaugeConfig(**kw)


# --- Hamiltonian -------------------------------------------------------------


@pytest.mark.parametrize("n,N", [(2, 2), (3, 2), (2, 4), (3, 4)])
def test_hamiltonian_matches_full_space_operator(n, N):
    cfg = GaugeConfig(n=n, N=N, m=-0.7, g=1.3)
    basis = enumerate_physical_basis(cfg)
    Hfull = full_space_hamiltonian(n, N, cfg.xi, cfg.mu)
    idx = [full_space_index(s, n) for s in basis]
    Hproj = Hfull[np.ix_(idx, idx)]
    assert np.abs(build_gauge_hamiltonian(cfg, basis) - Hproj).max() < 1e-12
    # the physical subspace is invariant: no leakage out of it
    P = np.zeros(Hfull.shape[0])
    P[idx] = 1
    leak = (1 - P)[:, None] * (Hfull @ np.diag(P))
    assert np.abs(leak).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from([(2, 2), (3, 2), (2, 4), (3, 4)]),
    st.floats(-3, 3),
    st.floats(0.1, 3),
)
def test_hamiltonian_is_hermitian(nN, m, g):
    n, N = nN
    H = build_gauge_hamiltonian(GaugeConfig(n=n, N=N, m=m, g=g))
    assert np.abs(H - H.conj().T).max() < 1e-12


def test_zero_coupling_raises_with_pointer_to_two_band_branch():
    with pytest.raises(ValueError, match="two_band"):
        build_gauge_hamiltonian(GaugeConfig(g=0.0))
    with pytest.raises(ValueError):
        GaugeConfig(g=0.0).xi


def test_vacuum_meson_hopping_element():
    cfg = GaugeConfig(m=0.3, g=0.8)
    H = build_gauge_hamiltonian(cfg)
    basis = enumerate_physical_basis(cfg)
    for k in range(3):
        i, j = basis.index(vacuum_state(k)), basis.index(meson_state(k))
        assert H[i, j] == pytest.approx(cfg.xi / 2)


# --- parity blocks -----------------------------------------------------------


def _config_for(xi, mu):
    g = 1 / sqrt(xi)
    return GaugeConfig(n=3, N=2, m=mu * g**2, g=g)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 5), st.floats(-3, 3))
def test_parity_rotation_reproduces_closed_form_blocks(xi, mu):
    cfg = _config_for(xi, mu)
    W = parity_rotation_matrix()
    Hr = W @ build_gauge_hamiltonian(cfg) @ W.T
    expected = np.zeros((6, 6), dtype=complex)
    expected[:4, :4] = block_hamiltonian(cfg.xi, cfg.mu)
    expected[4:, 4:] = odd_block_hamiltonian(cfg.xi, cfg.mu)
    assert np.abs(Hr - expected).max() < 1e-12
    parity = np.diag([1, 1, 1, 1, -1, -1])
    assert np.abs(Hr @ parity - parity @ Hr).max() < 1e-12


def test_rotation_is_orthogonal_and_diagonalises_parity():
    W = parity_rotation_matrix()
    assert np.abs(W @ W.T - np.eye(6)).max() < 1e-15
    P = parity_operator_n2()
    assert np.abs(W @ P @ W.T - np.diag([1, 1, 1, 1, -1, -1])).max() < 1e-15
    H = build_gauge_hamiltonian(GaugeConfig(m=-1.1, g=0.9))
    assert np.abs(P @ H - H @ P).max() < 1e-12


def test_parity_rotation_returns_blocks():
    cfg = GaugeConfig(m=-1.49, g=1.7)
    _, Hp, Hm = parity_rotation_n2(cfg)
    assert np.abs(Hp - block_hamiltonian(cfg.xi, cfg.mu)).max() < 1e-12
    assert np.abs(Hm - odd_block_hamiltonian(cfg.xi, cfg.mu)).max() < 1e-12


def test_parity_rotation_rejects_other_sizes():
    with pytest.raises(NotImplementedError):
        parity_rotation_n2(GaugeConfig(n=2, N=4))


def test_case2_diagonal_pattern():
    A = sqrt(6 / pi)
    m = -0.87
    g = A / sqrt(2) * sqrt(-m)
    H = g**2 * block_hamiltonian(1 / g**2, m / g**2)
    assert np.allclose(np.real(np.diag(H)), [-m, 0, -3 * m, -m], atol=1e-12)


def test_case1_resonance_is_detuned_rabi_ladder():
    A = sqrt(6 / pi)
    m = -1.49
    g = A * sqrt(-m)
    H = g**2 * block_hamiltonian(1 / g**2, m / g**2)
    delta = -2 * m
    r, h = 1 / sqrt(2), 0.5
    expected = np.array(
        [[0, r, 0, 0], [r, 0, h, 0], [0, h, 2 * delta, r], [0, 0, r, delta]]
    ) - m * np.eye(4)
    assert np.abs(H - expected).max() < 1e-12
