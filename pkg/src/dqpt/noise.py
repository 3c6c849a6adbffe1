"""Noise sampling and Monte Carlo ensembles over pulse-level runs.

Four sources are modelled: failed state preparation, readout flips, Doppler
detuning from thermal motion and shot-to-shot laser amplitude fluctuations.
Every realization draws from its own counter-based stream keyed by
``(seed, realization, step)``, so results do not depend on execution order.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from math import sqrt
from typing import Mapping, Sequence

import numpy as np

from .pulse import BOLTZMANN, AtomState, DeviceConfig, PulseSequence, qubit_populations, simulate_sequence

SOURCES = frozenset({"spam", "doppler", "amplitude"})


@dataclass(frozen=True)
class NoiseConfig:
    """Noise magnitudes and ensemble settings.

    ``temperature`` is in uK. ``shots`` is the number of readouts used to
    estimate populations in each realization, as in a real run where every
    noise draw is followed by a handful of measurements; ``0`` uses exact
    probabilities. With ``mitigate_readout`` the known readout confusion
    matrix is inverted on the estimated distribution.
    """

    eta: float = 0.005
    epsilon: float = 0.01
    epsilon_prime: float = 0.05
    temperature: float = 50.0
    amp_rel_sigma: float = 0.01
    enabled: frozenset = SOURCES
    seed: int = 0
    n_realizations: int = 100
    shots: int = 5
    mitigate_readout: bool = False

    def __post_init__(self):
        object.__setattr__(self, "enabled", frozenset(self.enabled))
        for name in ("eta", "epsilon", "epsilon_prime"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.amp_rel_sigma < 0:
            raise ValueError("amp_rel_sigma must be non-negative")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        unknown = self.enabled - SOURCES
        if unknown:
            raise ValueError(f"unknown noise sources {sorted(unknown)}")
        if self.mitigate_readout and self.epsilon + self.epsilon_prime >= 1:
            raise ValueError("readout confusion matrix is singular")

    @classmethod
    def noiseless(cls, **kw) -> "NoiseConfig":
        return cls(enabled=frozenset(), **kw)

    def only(self, *sources: str) -> "NoiseConfig":
        return replace(self, enabled=frozenset(sources))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["enabled"] = sorted(self.enabled)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseConfig":
        d = dict(d)
        if "enabled" in d:
            d["enabled"] = frozenset(d["enabled"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "NoiseConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class NoiseRealization:
    atom_prepared: tuple[bool, bool]
    doppler_shift: tuple[float, float]
    amp_factor: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amp_factor, dtype=float)
        if np.any(amp <= 0):
            raise ValueError("amplitude factors must be positive")
        if not np.all(np.isfinite(self.doppler_shift)):
            raise ValueError("Doppler shifts must be finite")
        object.__setattr__(self, "amp_factor", amp)

    @classmethod
    def identity(cls, n_pulses: int) -> "NoiseRealization":
        return cls((True, True), (0.0, 0.0), np.ones(n_pulses))


def doppler_sigma(temperature_uk: float, dev: DeviceConfig | None = None) -> float:
    """Detuning spread ``(2 pi / lambda_eff) sqrt(k_B T / M)`` in rad/us."""
    dev = dev or DeviceConfig()
    v_rms = sqrt(BOLTZMANN * temperature_uk * 1e-6 / dev.atom_mass)  # m/s = um/us
    return 2 * np.pi / dev.lambda_eff * v_rms


def realization_rng(seed: int, realization: int, step: int = 0) -> np.random.Generator:
    """Independent Philox stream for one (realization, step) pair."""
    ss = np.random.SeedSequence(seed, spawn_key=(realization, step))
    return np.random.Generator(np.random.Philox(ss))


def sample_realization(
    cfg: NoiseConfig, n_pulses: int, rng: np.random.Generator, dev: DeviceConfig | None = None
) -> NoiseRealization:
    """Draw one realization. Draw order is fixed so disabling a source never
    shifts the random numbers used by the others."""
    prep_u = rng.random(2)
    dop_z = rng.standard_normal(2)
    amp_z = rng.standard_normal(n_pulses)
    prepared = (True, True)
    doppler = (0.0, 0.0)
    amp = np.ones(n_pulses)
    if "spam" in cfg.enabled:
        prepared = tuple(bool(u >= cfg.eta) for u in prep_u)
    if "doppler" in cfg.enabled:
        s = doppler_sigma(cfg.temperature, dev)
        doppler = tuple(float(s * z) for z in dop_z)
    if "amplitude" in cfg.enabled:
        amp = 1 + cfg.amp_rel_sigma * amp_z
        # truncate at zero by redrawing the offending factors
        while np.any(amp <= 0):
            bad = amp <= 0
            amp[bad] = 1 + cfg.amp_rel_sigma * rng.standard_normal(bad.sum())
    return NoiseRealization(prepared, doppler, amp)


# --- readout ------------------------------------------------------------------


def _bits(key: str) -> tuple[int, int]:
    return int(key[0]), int(key[1])


def spam_postprocess(
    counts: Mapping[str, int], cfg: NoiseConfig, rng: np.random.Generator, prepared=None
) -> dict[str, int]:
    """Apply preparation failures and readout flips shot by shot.

    Keys are bitstrings ``"q1q0"``. An unprepared atom reads 0 before flips.
    If ``prepared`` is ``None`` preparation is sampled per shot with ``cfg.eta``.
    False negatives (1 read as 0) occur with ``epsilon``, false positives with
    ``epsilon_prime``.
    """
    shots = []
    for key, n in sorted(counts.items()):
        shots += [_bits(key)] * int(n)
    if not shots:
        return {}
    b = np.array(shots, dtype=int)  # columns: q1, q0
    n = len(b)
    if prepared is None:
        ok = rng.random((n, 2)) >= cfg.eta
    else:
        # columns follow (q1, q0); prepared is indexed by atom
        ok = np.broadcast_to(np.array([prepared[1], prepared[0]], dtype=bool), (n, 2))
    b = np.where(ok, b, 0)
    u = rng.random((n, 2))
    flip = np.where(b == 1, u < cfg.epsilon, u < cfg.epsilon_prime)
    b = np.where(flip, 1 - b, b)
    out: dict[str, int] = {}
    for q1, q0 in b:
        k = f"{q1}{q0}"
        out[k] = out.get(k, 0) + 1
    return dict(sorted(out.items()))


def confusion_matrix(cfg: NoiseConfig) -> np.ndarray:
    """``C[read, true]`` on the two-qubit outcome index ``2 q1 + q0``."""
    c1 = np.array([[1 - cfg.epsilon_prime, cfg.epsilon], [cfg.epsilon_prime, 1 - cfg.epsilon]])
    return np.kron(c1, c1)


def readout_distribution(true_probs: np.ndarray, cfg: NoiseConfig, prepared=(True, True)) -> np.ndarray:
    """Exact outcome distribution after preparation failures and readout flips."""
    p = np.asarray(true_probs, dtype=float).reshape(2, 2)
    if not prepared[1]:
        p = np.stack([p.sum(axis=0), np.zeros(2)])
    if not prepared[0]:
        p = np.stack([p.sum(axis=1), np.zeros(2)], axis=1)
    return confusion_matrix(cfg) @ p.reshape(4)


# --- ensembles ------------------------------------------------------------


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def box_stats(x: np.ndarray) -> BoxStats:
    x = np.asarray(x, dtype=float)
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    inside = x[(x >= q1 - 1.5 * iqr) & (x <= q3 + 1.5 * iqr)]
    return BoxStats(float(med), float(q1), float(q3), float(inside.min()), float(inside.max()))


@dataclass(frozen=True)
class EnsembleStats:
    """Per-step, per-state population statistics over realizations.

    ``mean`` and ``std`` have shape ``(n_steps, 4)``; ``std`` uses ``ddof=1``.
    """

    mean: np.ndarray
    std: np.ndarray
    n_realizations: int
    label: str = ""
    samples: np.ndarray | None = field(default=None, repr=False)

    def box(self, state: int) -> BoxStats:
        return box_stats(self.std[:, state])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["timeStep", "state", "mean", "std"])
        for t in range(self.mean.shape[0]):
            for s in range(4):
                w.writerow([t, s + 1, f"{self.mean[t, s]:.12g}", f"{self.std[t, s]:.12g}"])
        return buf.getvalue()


def _estimate(true_probs, cfg: NoiseConfig, real: NoiseRealization, rng) -> np.ndarray:
    spam = "spam" in cfg.enabled
    dist = readout_distribution(true_probs, cfg, real.atom_prepared) if spam else np.asarray(true_probs)
    dist = np.clip(dist, 0, None)
    dist = dist / dist.sum()
    if cfg.shots:
        est = rng.multinomial(cfg.shots, dist) / cfg.shots
    else:
        est = dist
    if spam and cfg.mitigate_readout:
        est = np.linalg.solve(confusion_matrix(cfg), est)
    return est


def _run_realization(args) -> np.ndarray:
    seqs, dev, psi0, cfg, r = args
    out = np.empty((len(seqs), 4))
    for step, seq in enumerate(seqs):
        rng = realization_rng(cfg.seed, r, step)
        real = sample_realization(cfg, len(seq.pulses), rng, dev)
        final = simulate_sequence(seq, dev, psi0, real, record="final")[-1]
        out[step] = _estimate(qubit_populations(final), cfg, real, rng)
    return out


def _workers(n_tasks: int) -> int:
    env = os.environ.get("DQPT_THREADS")
    n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ValueError(f"DQPT_THREADS must be >= 1, got {env}")
    return max(1, min(n, n_tasks))


def monte_carlo(
    seqs: PulseSequence | Sequence[PulseSequence],
    dev: DeviceConfig | None,
    psi0: AtomState | None,
    cfg: NoiseConfig,
    label: str = "",
    keep_samples: bool = False,
) -> EnsembleStats:
    """Population statistics over ``cfg.n_realizations`` noisy runs.

    ``seqs`` holds one sequence per time step (a single sequence is one step).
    Realizations run in a process pool capped by ``DQPT_THREADS``; the
    reduction is an ordered fold, so output is independent of scheduling.
    """
    if isinstance(seqs, PulseSequence):
        seqs = [seqs]
    seqs = list(seqs)
    dev = dev or DeviceConfig()
    tasks = [(seqs, dev, psi0, cfg, r) for r in range(cfg.n_realizations)]
    n = _workers(len(tasks))
    if n == 1:
        runs = [_run_realization(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            runs = list(pool.map(_run_realization, tasks))
    data = np.stack(runs)  # (realization, step, state)
    # shift by the first realization: identical runs then give exactly zero spread
    centered = data - data[0]
    mean = data[0] + centered.mean(axis=0)
    std = centered.std(axis=0, ddof=1) if cfg.n_realizations > 1 else np.zeros_like(mean)
    return EnsembleStats(mean, std, cfg.n_realizations, label, data if keep_samples else None)


def fluctuation_boxplots(runs: Mapping[str, EnsembleStats]) -> list[dict]:
    """Box-plot summary of each model's ``std`` time series, per state."""
    rows = []
    for model, stats in runs.items():
        for s in range(stats.std.shape[1]):
            b = stats.box(s)
            rows.append(
                {
                    "model": model,
                    "state": s + 1,
                    "median": b.median,
                    "q1": b.q1,
                    "q3": b.q3,
                    "whisker_low": b.whisker_low,
                    "whisker_high": b.whisker_high,
                }
            )
    return rows


def boxplots_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["model", "state", "median", "q1", "q3", "whisker_low", "whisker_high"]
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if c in ("model", "state") else f"{r[c]:.12g}" for c in cols])
    return buf.getvalue()
