"""Exact quench dynamics of the even-parity block and Loschmidt-echo diagnostics.

Times come in two flavours. Physical time ``t`` is in units of ``1/J``.
Reported (rescaled) time is ``t * sqrt(m^2 + J^2)``, which is what every
public time grid and every exported column uses.

The physical Hamiltonian of the four-state block is ``(g^2/J) H~(xi, mu)``
with ``xi = J^2/g^2`` and ``mu = m J/g^2``.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from math import pi, sqrt

import numpy as np
from scipy.optimize import minimize_scalar

from .model import block_hamiltonian

ECHO_FLOOR = 1e-15
ZERO_THRESHOLD = 1e-3
RESONANCE_A = sqrt(6 / pi)
CRITICAL_MASS = 1 / sqrt(2)


def dirac_vacuum(dim: int = 4) -> np.ndarray:
    """``psi_1+``, the first basis vector of the even block."""
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    return psi


def rescale_factor(m_over_j: float, J: float = 1.0) -> float:
    """Factor converting physical time to reported time, ``sqrt(m^2 + J^2)``."""
    return sqrt(m_over_j**2 + J**2)


def quench_hamiltonian(m_over_j: float, g_over_j: float, J: float = 1.0) -> np.ndarray:
    """Physical even-block Hamiltonian in units where time is ``1/J``."""
    if g_over_j == 0:
        raise ValueError("g = 0 has no gauge block; use two_band_amplitude")
    g2 = g_over_j**2
    return g2 / J * block_hamiltonian(J**2 / g2, m_over_j * J / g2)


@dataclass(frozen=True)
class QuenchSpec:
    """A quench: evolve ``initial_state`` under ``hamiltonian`` on ``time_grid``.

    ``time_grid`` is in reported units; ``time_scale`` converts physical time
    to those units (``sqrt(m^2 + J^2)``).
    """

    hamiltonian: np.ndarray
    time_grid: np.ndarray
    initial_state: np.ndarray = field(default_factory=dirac_vacuum)
    time_scale: float = 1.0

    def __post_init__(self):
        H = np.asarray(self.hamiltonian, dtype=complex)
        psi = np.asarray(self.initial_state, dtype=complex)
        t = np.asarray(self.time_grid, dtype=float)
        if abs(np.linalg.norm(psi) - 1) > 1e-12:
            raise ValueError("initial state must be normalised to 1e-12")
        if psi.shape != (H.shape[0],):
            raise ValueError("initial state and Hamiltonian dimensions differ")
        if t.ndim != 1 or len(t) == 0 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must start at 0 and increase strictly")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "initial_state", psi)
        object.__setattr__(self, "time_grid", t)

    @classmethod
    def for_couplings(cls, m_over_j: float, g_over_j: float, time_grid, initial_state=None):
        H = quench_hamiltonian(m_over_j, g_over_j)
        psi = dirac_vacuum() if initial_state is None else initial_state
        return cls(H, np.asarray(time_grid, float), psi, rescale_factor(m_over_j))

    @property
    def physical_times(self) -> np.ndarray:
        return self.time_grid / self.time_scale


@dataclass(frozen=True)
class LoschmidtSeries:
    times: np.ndarray
    amplitude: np.ndarray
    echo: np.ndarray
    rate: np.ndarray | None = None
    N: int = 2
    clamped: np.ndarray | None = None


@dataclass(frozen=True)
class LociPoint:
    m_over_j: float
    g_over_j: float
    critical_times: tuple[float, ...]


def _check_hermitian(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {H.shape}")
    if np.abs(H - H.conj().T).max() > 1e-12 * max(1.0, np.abs(H).max()):
        raise ValueError("Hamiltonian is not Hermitian")
    return H


def _propagator_parts(H: np.ndarray, psi0: np.ndarray):
    w, V = np.linalg.eigh(_check_hermitian(H))
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state is not normalised")
    return w, V, V.conj().T @ psi0


def evolve_exact(H: np.ndarray, psi0: np.ndarray, t) -> np.ndarray:
    """``exp(-i H t) psi0`` by one eigendecomposition.

    ``t`` may be a scalar (returns a vector) or an array (returns one row per time).
    """
    w, V, c = _propagator_parts(H, psi0)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = (np.exp(-1j * np.outer(ts, w)) * c[None, :]) @ V.T
    if np.ndim(t) == 0:
        out = out[0]
        if t == 0:
            return np.asarray(psi0, dtype=complex).copy()
    return out


def loschmidt_amplitude(H: np.ndarray, psi0: np.ndarray, t):
    """``<psi0| exp(-i H t) |psi0>`` (scalar or array, matching ``t``)."""
    w, _, c = _propagator_parts(H, psi0)
    ts = np.asarray(t, dtype=float)
    weights = np.abs(c) ** 2
    G = np.exp(-1j * np.multiply.outer(ts, w)) @ weights
    return complex(G) if np.ndim(t) == 0 else G


def rate_function(series: LoschmidtSeries, N: int | None = None) -> LoschmidtSeries:
    """Fill ``rate = -(1/N) ln(echo)`` with the echo floored at ``ECHO_FLOOR``."""
    N = series.N if N is None else N
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    echo = np.asarray(series.echo, dtype=float)
    clamped = echo < ECHO_FLOOR
    rate = -np.log(np.maximum(echo, ECHO_FLOOR)) / N
    return replace(series, rate=rate, N=N, clamped=clamped)


def loschmidt_series(spec: QuenchSpec, N: int = 2) -> LoschmidtSeries:
    G = loschmidt_amplitude(spec.hamiltonian, spec.initial_state, spec.physical_times)
    echo = np.clip(np.abs(G) ** 2, 0.0, 1.0)
    return rate_function(LoschmidtSeries(spec.time_grid, G, echo, N=N))


def populations_exact(spec: QuenchSpec) -> np.ndarray:
    """Basis-state populations, one row per reported time."""
    psi = evolve_exact(spec.hamiltonian, spec.initial_state, spec.physical_times)
    return np.abs(psi) ** 2


# --- non-interacting branch -------------------------------------------------


def two_band_amplitude(d0, d1, omega1: float, t):
    """Single-mode amplitude ``cos(w t) + i (d0.d1)/(|d0||d1|) sin(w t)``."""
    d0 = np.asarray(d0, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    n0, n1 = np.linalg.norm(d0), np.linalg.norm(d1)
    if n0 == 0 or n1 == 0:
        raise ValueError("two-band vectors must have non-zero length")
    overlap = float(d0 @ d1) / (n0 * n1)
    t = np.asarray(t, dtype=float)
    G = np.cos(omega1 * t) + 1j * overlap * np.sin(omega1 * t)
    return complex(G) if G.ndim == 0 else G


def mass_quench_vectors(m_bar: float, m: float, J: float = 1.0):
    """``(d0, d1, omega1)`` for a free mass quench with ``d = (0, -J, m)``."""
    d0 = np.array([0.0, -J, m_bar])
    d1 = np.array([0.0, -J, m])
    return d0, d1, float(np.linalg.norm(d1))


def mass_quench_amplitude(m_bar: float, m: float, t, J: float = 1.0):
    d0, d1, w = mass_quench_vectors(m_bar, m, J)
    return two_band_amplitude(d0, d1, w, t)


def dirac_vacuum_amplitude(m: float, t, J: float = 1.0):
    """Free quench from the Dirac vacuum (``d0`` along the mass axis) to mass ``m``."""
    d1 = np.array([0.0, -J, m])
    return two_band_amplitude([0.0, 0.0, 1.0], d1, float(np.linalg.norm(d1)), t)


def two_band_zero_times(d0, d1, omega1: float, t_max: float, tol: float = 1e-12) -> np.ndarray:
    """Zeros ``(k + 1/2) pi / w`` up to ``t_max``; empty unless ``d0 . d1 = 0``."""
    d0 = np.asarray(d0, float)
    d1 = np.asarray(d1, float)
    if abs(d0 @ d1) > tol * np.linalg.norm(d0) * np.linalg.norm(d1):
        return np.array([])
    k = np.arange(int(np.floor(t_max * omega1 / pi - 0.5)) + 1)
    return (k + 0.5) * pi / omega1


# --- zero loci -----------------------------------------------------------


def critical_times(
    H: np.ndarray,
    psi0: np.ndarray,
    time_grid: np.ndarray,
    time_scale: float,
    zero_threshold: float = ZERO_THRESHOLD,
    N: int = 2,
) -> list[float]:
    """Refined local minima of the echo with echo below ``zero_threshold``.

    Each sampled local minimum is bracketed by its neighbours and refined by
    golden-section search to 1e-6 in reported time. A candidate must also have
    a rate above twice the median rate over the window.
    """
    w, _, c = _propagator_parts(H, psi0)
    weights = np.abs(c) ** 2
    T = np.asarray(time_grid, dtype=float)

    def echo(tr):
        return abs(np.exp(-1j * w * (tr / time_scale)) @ weights) ** 2

    L = np.abs(np.exp(-1j * np.outer(T / time_scale, w)) @ weights) ** 2
    floor = 2 * np.median(-np.log(np.maximum(L, ECHO_FLOOR)) / N)
    interior = np.where((L[1:-1] < L[:-2]) & (L[1:-1] <= L[2:]))[0] + 1
    out = []
    for i in interior:
        res = minimize_scalar(
            echo, bracket=(T[i - 1], T[i], T[i + 1]), method="golden", tol=1e-9
        )
        t_c, e_c = float(res.x), float(res.fun)
        if not T[i - 1] <= t_c <= T[i + 1]:
            t_c, e_c = float(T[i]), float(L[i])
        if e_c < zero_threshold and -np.log(max(e_c, ECHO_FLOOR)) / N > floor:
            out.append(t_c)
    return out


def _scan_row(args) -> list[LociPoint]:
    m, g_values, time_grid, zero_threshold = args
    row = []
    for g in g_values:
        if g == 0:
            # free branch from the Dirac vacuum: zeros only at m = 0
            d1 = np.array([0.0, -1.0, m])
            ts = two_band_zero_times([0, 0, 1.0], d1, float(np.linalg.norm(d1)), time_grid[-1] / rescale_factor(m))
            times = tuple(float(x) * rescale_factor(m) for x in ts)
        else:
            times = tuple(
                critical_times(
                    quench_hamiltonian(m, g), dirac_vacuum(), time_grid, rescale_factor(m), zero_threshold
                )
            )
        if times:
            row.append(LociPoint(float(m), float(g), times))
    return row


def worker_count(default: int | None = None) -> int:
    env = os.environ.get("DQPT_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"DQPT_THREADS must be >= 1, got {env}")
        return n
    return default or os.cpu_count() or 1


def scan_zero_loci(
    m_values,
    g_values,
    time_window: tuple[float, float] = (0.0, 25.0),
    n_times: int = 2501,
    zero_threshold: float = ZERO_THRESHOLD,
    workers: int | None = None,
) -> list[LociPoint]:
    """Critical times of the Dirac-vacuum quench for every ``(m, g)`` on a grid.

    Grid points without any zero are omitted. Results are ordered by ``m``
    then ``g``, independent of the number of workers.
    """
    t0, t1 = time_window
    if t0 != 0 or t1 <= 0:
        raise ValueError("time window must be (0, t_max) with t_max > 0")
    m_values = np.asarray(m_values, dtype=float)
    g_values = np.asarray(g_values, dtype=float)
    if not (np.all(np.isfinite(m_values)) and np.all(np.isfinite(g_values))):
        raise ValueError("grid must be finite")
    grid = np.linspace(t0, t1, n_times)
    tasks = [(m, g_values, grid, zero_threshold) for m in m_values]
    n = min(worker_count(workers), len(tasks))
    if n <= 1:
        rows = map(_scan_row, tasks)
        return [p for row in rows for p in row]
    with ProcessPoolExecutor(max_workers=n) as pool:
        rows = list(pool.map(_scan_row, tasks))
    return [p for row in rows for p in row]


def subcritical_branch(points, rel_tol: float = 0.1) -> list[LociPoint]:
    """Points below the critical mass whose zeros form a periodic train.

    A periodic train starting from ``t = 0`` has its first zero at half the
    spacing between the first two.
    """
    out = []
    for p in points:
        ts = p.critical_times
        if p.m_over_j >= -CRITICAL_MASS or p.g_over_j <= 0 or len(ts) < 2:
            continue
        if abs(ts[0] - (ts[1] - ts[0]) / 2) < rel_tol * ts[0]:
            out.append(p)
    return out


def fit_loci_regression(points, select_branch: bool = True) -> tuple[float, float]:
    """Least-squares ``ln(g/J) = intercept + slope * ln(-m/J)``."""
    pts = subcritical_branch(points) if select_branch else list(points)
    if len(pts) < 5:
        raise ValueError(f"need at least 5 sub-critical points for the fit, got {len(pts)}")
    x = np.log([-p.m_over_j for p in pts])
    y = np.log([p.g_over_j for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return float(intercept), float(slope)


def resonance_coupling(case: int, m_over_j: float) -> float:
    """Coupling at which the vacuum is resonant with the meson (case 1) or
    with the doubly excited state (case 2)."""
    if m_over_j >= 0:
        raise ValueError(f"resonance needs m/J < 0, got {m_over_j}")
    if case == 1:
        return RESONANCE_A * sqrt(-m_over_j)
    if case == 2:
        return RESONANCE_A / sqrt(2) * sqrt(-m_over_j)
    raise ValueError(f"case must be 1 or 2, got {case}")


def oscillation_period(times: np.ndarray, signal: np.ndarray) -> float:
    """Mean spacing between successive interior local minima of ``signal``."""
    s = np.asarray(signal, dtype=float)
    idx = np.where((s[1:-1] < s[:-2]) & (s[1:-1] <= s[2:]))[0] + 1
    if len(idx) < 2:
        raise ValueError("fewer than two minima; extend the time window")
    return float(np.mean(np.diff(np.asarray(times)[idx])))
