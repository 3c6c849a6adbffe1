"""Z_n-truncated lattice Schwinger model on a periodic chain.

Builds the gauge-invariant basis, the spin-form Hamiltonian restricted to it,
and (for two sites with a Z_3 link space) the parity rotation into the
block-diagonal form used by the two-qubit encoding.

Conventions
-----------
* Site ``x`` carries an occupation bit; link ``x -> x+1`` carries an electric
  index ``k`` in ``[0, n)`` with value ``e_k``. The link ``N-1 -> 0`` closes the
  ring.
* Occupation corresponds to spin-down in the spin form, so the hopping term
  ``sigma^-_x U sigma^+_{x+1}`` moves a fermion from ``x+1`` to ``x`` while
  raising the field on link ``x``. This is the orientation for which the
  hopping commutes with the Gauss-law generators.
* The Gauss law is taken modulo ``n`` (the link space is cyclic) and the basis
  is restricted to the neutral sector, ``sum(occupations) == N/2``.
* The Hamiltonian carries an overall factor 1/2 relative to the bare spin
  expression, which is the normalisation under which the two-site parity
  blocks come out as ``H+`` and ``H-`` below.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, pi, sqrt

import numpy as np


@dataclass(frozen=True)
class GaugeConfig:
    """Lattice and coupling parameters. ``J`` sets the energy unit."""

    n: int = 3
    N: int = 2
    m: float = 0.0
    J: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"Z_n truncation needs n >= 2, got {self.n}")
        if self.N < 2 or self.N % 2:
            raise ValueError(f"number of sites must be even and >= 2, got {self.N}")
        if self.J <= 0:
            raise ValueError(f"hopping J must be positive, got {self.J}")

    @property
    def xi(self) -> float:
        self._require_coupling()
        return self.J**2 / self.g**2

    @property
    def mu(self) -> float:
        self._require_coupling()
        return self.m * self.J / self.g**2

    def _require_coupling(self):
        if self.g == 0:
            raise ValueError(
                "g = 0 has no rescaled couplings; use the two-band "
                "formulas in dqpt.quench for the non-interacting quench"
            )


@dataclass(frozen=True)
class PhysicalState:
    occupations: tuple[int, ...]
    field_indices: tuple[int, ...]


@dataclass(frozen=True)
class PhysicalBasis:
    states: tuple[PhysicalState, ...]
    n: int

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def index(self, state: PhysicalState) -> int:
        return self.states.index(state)


def electric_field_value(k: int, n: int) -> float:
    """Electric field eigenvalue ``e_k = sqrt(2 pi / n) (k - (n - 1) / 2)``."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 0 <= k < n:
        raise ValueError(f"field index {k} outside [0, {n})")
    return sqrt(2 * pi / n) * (k - (n - 1) / 2)


def staggered_charge(x: int, occupation: int) -> int:
    # (-1)^x - 1 over 2 is 0 on even sites, -1 on odd sites
    return occupation + ((-1) ** x - 1) // 2


def satisfies_gauss_law(state: PhysicalState, n: int) -> bool:
    """Check ``G_x |phi> = 0`` at every site, modulo ``n``.

    ``sqrt(n / 2 pi) (E_{x,x+1} - E_{x-1,x})`` reduces to the index difference
    ``k_x - k_{x-1}``.
    """
    N = len(state.occupations)
    k = state.field_indices
    for x in range(N):
        lhs = k[x] - k[x - 1]
        if (lhs - staggered_charge(x, state.occupations[x])) % n:
            return False
    return True


def enumerate_physical_basis(cfg: GaugeConfig) -> PhysicalBasis:
    """All neutral Gauss-law states, canonically ordered.

    States are sorted by ``(field_indices, occupations)``. For ``n=3, N=2`` the
    order is instead ``vac_-, meson_-, vac_0, meson_0, vac_+, meson_+`` where
    the label is the field on the closing link ``1 -> 0``.
    """
    n, N = cfg.n, cfg.N
    states = []
    for occ in itertools.product((0, 1), repeat=N):
        if sum(occ) != N // 2:
            continue
        # Gauss law fixes every link once the closing link is chosen
        for k_last in range(n):
            k = [0] * N
            k[N - 1] = k_last
            for x in range(N - 1):
                k[x] = (k[x - 1] + staggered_charge(x, occ[x])) % n
            state = PhysicalState(tuple(occ), tuple(k))
            if satisfies_gauss_law(state, n):
                states.append(state)
    states.sort(key=lambda s: (s.field_indices, s.occupations))
    assert len(states) == n * comb(N, N // 2)
    if (n, N) == (3, 2):
        states = list(_vacuum_meson_order())
    return PhysicalBasis(tuple(states), n)


def _vacuum_meson_order():
    for k_closing in range(3):
        yield vacuum_state(k_closing)
        yield meson_state(k_closing)


def vacuum_state(k_closing: int) -> PhysicalState:
    """Two-site Dirac vacuum (site 1 filled) with closing-link index ``k_closing``."""
    return PhysicalState((0, 1), (k_closing, k_closing))


def meson_state(k_closing: int, n: int = 3) -> PhysicalState:
    """Two-site meson (site 0 filled) with closing-link index ``k_closing``."""
    return PhysicalState((1, 0), ((k_closing + 1) % n, k_closing))


def build_gauge_hamiltonian(cfg: GaugeConfig, basis: PhysicalBasis | None = None) -> np.ndarray:
    """Dense matrix of the spin-form Hamiltonian in the physical basis.

    ``H = 1/2 [ xi sum_x (s^-_x U_x s^+_{x+1} + h.c.) - mu sum_x (-1)^x Z_x
    + sum_x E_x^2 ]`` with periodic site labels.
    """
    if cfg.g == 0:
        raise ValueError(
            "g = 0: the gauge Hamiltonian is undefined in rescaled units; "
            "use dqpt.quench.two_band_amplitude for the non-interacting branch"
        )
    if basis is None:
        basis = enumerate_physical_basis(cfg)
    xi, mu, n, N = cfg.xi, cfg.mu, cfg.n, cfg.N
    lookup = {s: i for i, s in enumerate(basis)}
    H = np.zeros((len(basis), len(basis)), dtype=complex)
    for i, s in enumerate(basis):
        occ, k = s.occupations, s.field_indices
        # Z_x = +1 on an empty site
        mass = -mu * sum((-1) ** x * (1 - 2 * occ[x]) for x in range(N))
        electric = sum(electric_field_value(kx, n) ** 2 for kx in k)
        H[i, i] += 0.5 * (mass + electric)
        for x in range(N):
            y = (x + 1) % N
            if occ[y] == 1 and occ[x] == 0:
                new_occ = list(occ)
                new_occ[x], new_occ[y] = 1, 0
                new_k = list(k)
                new_k[x] = (k[x] + 1) % n
                j = lookup[PhysicalState(tuple(new_occ), tuple(new_k))]
                H[j, i] += 0.5 * xi
                H[i, j] += 0.5 * xi
    return H


def parity_operator_n2() -> np.ndarray:
    """Parity ``P`` on the six-state ``n=3, N=2`` basis."""
    vm, mm, v0, m0, vp, mp = range(6)
    P = np.zeros((6, 6))
    for a, b in ((m0, mm), (vm, vp)):
        P[a, b] = P[b, a] = 1.0
    P[mp, mp] = P[v0, v0] = 1.0
    return P


def parity_rotation_matrix() -> np.ndarray:
    """Rows are ``psi_1+ .. psi_4+, psi_1-, psi_2-`` in the six-state basis."""
    vm, mm, v0, m0, vp, mp = range(6)
    s = 1 / sqrt(2)
    W = np.zeros((6, 6))
    W[0, v0] = 1.0
    W[1, m0], W[1, mm] = s, s
    W[2, vp], W[2, vm] = s, s
    W[3, mp] = 1.0
    W[4, m0], W[4, mm] = s, -s
    W[5, vp], W[5, vm] = s, -s
    return W


def parity_rotation_n2(cfg: GaugeConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rotate the two-site Z_3 Hamiltonian into parity blocks.

    Returns ``(W, H_plus, H_minus)`` with ``W H W^dagger = H_plus (+) H_minus``.
    """
    if (cfg.n, cfg.N) != (3, 2):
        raise NotImplementedError(
            f"parity blocks are only defined for n=3, N=2 (got n={cfg.n}, N={cfg.N})"
        )
    W = parity_rotation_matrix()
    Hr = W @ build_gauge_hamiltonian(cfg) @ W.T
    off = max(np.abs(Hr[:4, 4:]).max(), np.abs(Hr[4:, :4]).max())
    if off > 1e-12:
        raise RuntimeError(f"parity rotation left off-block weight {off:.3e}")
    return W, Hr[:4, :4], Hr[4:, 4:]


def block_hamiltonian(xi: float, mu: float) -> np.ndarray:
    """Closed-form even-parity block ``H+`` on ``psi_1+ .. psi_4+``."""
    r = xi / sqrt(2)
    h = xi / 2
    return np.array(
        [
            [-mu, r, 0, 0],
            [r, mu + pi / 3, h, 0],
            [0, h, -mu + 2 * pi / 3, r],
            [0, 0, r, mu + 2 * pi / 3],
        ],
        dtype=complex,
    )


def odd_block_hamiltonian(xi: float, mu: float) -> np.ndarray:
    """Closed-form odd-parity block ``H-`` on ``psi_1-, psi_2-``."""
    return np.array(
        [[mu + pi / 3, xi / 2], [xi / 2, -mu + 2 * pi / 3]],
        dtype=complex,
    )
