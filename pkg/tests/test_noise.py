from math import pi, sqrt

import numpy as np
import pytest
import scipy.constants as const

from dqpt.circuit import Circuit, Gate
from dqpt.noise import (
    NoiseConfig,
    NoiseRealization,
    box_stats,
    boxplots_to_csv,
    confusion_matrix,
    doppler_sigma,
    fluctuation_boxplots,
    monte_carlo,
    readout_distribution,
    realization_rng,
    sample_realization,
    spam_postprocess,
)
from dqpt.pulse import DeviceConfig, compile_to_pulses, qubit_populations, simulate_sequence

DEV = DeviceConfig()
N_DRAWS = 100_000


def within_binomial(k, n, p, z=3.0):
    return abs(k / n - p) < z * sqrt(p * (1 - p) / n)


def small_sequences():
    circuits = [
        Circuit((Gate("RX", 0, 0.4 * k), Gate("CNOT", 0, control=1), Gate("RX", 1, 0.3)))
        for k in range(4)
    ]
    return [compile_to_pulses(c, DEV) for c in circuits]


# --- configuration --------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"eta": -0.1},
        {"epsilon": 1.5},
        {"temperature": -1.0},
        {"amp_rel_sigma": -0.1},
        {"n_realizations": 0},
        {"shots": -1},
        {"enabled": {"lasers"}},
        {"seed": -1},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        NoiseConfig(**kw)


def test_config_json_roundtrip():
    cfg = NoiseConfig(eta=0.02, seed=42, shots=0).only("spam", "doppler")
    assert NoiseConfig.from_json(cfg.to_json()) == cfg


def test_realization_validation():
    with pytest.raises(ValueError):
        NoiseRealization((True, True), (0.0, 0.0), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        NoiseRealization((True, True), (np.inf, 0.0), np.ones(2))


# --- sampling ------------------------------------------------------------------------


def test_disabled_noise_gives_identity_realization():
    real = sample_realization(NoiseConfig.noiseless(), 7, realization_rng(0, 0))
    ident = NoiseRealization.identity(7)
    assert real.atom_prepared == ident.atom_prepared
    assert real.doppler_shift == ident.doppler_shift
    assert np.array_equal(real.amp_factor, ident.amp_factor)


def test_preparation_failure_rate():
    cfg = NoiseConfig(eta=0.3).only("spam")
    rng = realization_rng(1, 0)
    fails = sum(not ok for _ in range(N_DRAWS // 2) for ok in sample_realization(cfg, 0, rng).atom_prepared)
    assert within_binomial(fails, N_DRAWS, 0.3)


def test_doppler_sigma_against_constants():
    k_b = const.k
    mass = 86.909180527 * const.physical_constants["atomic mass constant"][0]
    expected = 2 * pi / 0.722 * sqrt(k_b * 50e-6 / mass)
    assert doppler_sigma(50.0) == pytest.approx(expected, rel=1e-8)
    assert doppler_sigma(100.0) / doppler_sigma(50.0) == pytest.approx(sqrt(2))
    assert doppler_sigma(0.0) == 0.0


def test_doppler_draws_have_configured_spread():
    for T in (50.0, 200.0):
        cfg = NoiseConfig(temperature=T).only("doppler")
        rng = realization_rng(2, 0)
        x = np.array([sample_realization(cfg, 0, rng).doppler_shift for _ in range(N_DRAWS // 2)]).ravel()
        s = doppler_sigma(T)
        assert abs(x.std() - s) < 4 * s / sqrt(2 * len(x))
        assert abs(x.mean()) < 4 * s / sqrt(len(x))


def test_amplitude_factors():
    cfg = NoiseConfig(amp_rel_sigma=0.01).only("amplitude")
    amp = sample_realization(cfg, N_DRAWS, realization_rng(3, 0)).amp_factor
    assert abs(amp.mean() - 1) < 4 * 0.01 / sqrt(N_DRAWS)
    assert abs(amp.std() - 0.01) < 4 * 0.01 / sqrt(2 * N_DRAWS)
    wide = sample_realization(NoiseConfig(amp_rel_sigma=2.0).only("amplitude"), 1000, realization_rng(3, 1))
    assert np.all(wide.amp_factor > 0)


def test_draws_are_stable_when_sources_are_toggled():
    full = sample_realization(NoiseConfig(), 5, realization_rng(9, 4, 2))
    dop = sample_realization(NoiseConfig().only("doppler"), 5, realization_rng(9, 4, 2))
    amp = sample_realization(NoiseConfig().only("amplitude"), 5, realization_rng(9, 4, 2))
    assert full.doppler_shift == dop.doppler_shift
    assert np.array_equal(full.amp_factor, amp.amp_factor)


def test_rng_streams_are_deterministic_and_distinct():
    a = realization_rng(5, 1, 2).random(4)
    assert np.array_equal(a, realization_rng(5, 1, 2).random(4))
    assert not np.array_equal(a, realization_rng(5, 2, 1).random(4))
    assert not np.array_equal(a, realization_rng(6, 1, 2).random(4))


# --- readout -------------------------------------------------------------------------


def test_false_positive_rate_on_ground_atoms():
    cfg = NoiseConfig(eta=0.0, epsilon=0.0, epsilon_prime=0.02)
    out = spam_postprocess({"00": N_DRAWS}, cfg, realization_rng(0, 0))
    ones_q0 = out.get("01", 0) + out.get("11", 0)
    ones_q1 = out.get("10", 0) + out.get("11", 0)
    assert within_binomial(ones_q0, N_DRAWS, 0.02)
    assert within_binomial(ones_q1, N_DRAWS, 0.02)


def test_false_negative_rate_on_excited_atoms():
    cfg = NoiseConfig(eta=0.0, epsilon=0.01, epsilon_prime=0.0)
    out = spam_postprocess({"11": N_DRAWS}, cfg, realization_rng(0, 1))
    zeros_q0 = out.get("00", 0) + out.get("10", 0)
    assert within_binomial(zeros_q0, N_DRAWS, 0.01)
    assert sum(out.values()) == N_DRAWS


def test_preparation_failure_reads_zero():
    cfg = NoiseConfig(eta=0.1, epsilon=0.0, epsilon_prime=0.0)
    out = spam_postprocess({"11": N_DRAWS}, cfg, realization_rng(0, 2))
    zeros_q1 = out.get("00", 0) + out.get("01", 0)
    assert within_binomial(zeros_q1, N_DRAWS, 0.1)
    fixed = spam_postprocess({"11": 10}, cfg, realization_rng(0, 3), prepared=(True, False))
    assert fixed == {"01": 10}


def test_zero_rates_leave_counts_unchanged():
    cfg = NoiseConfig(eta=0.0, epsilon=0.0, epsilon_prime=0.0)
    counts = {"00": 3, "01": 5, "10": 7, "11": 11}
    assert spam_postprocess(counts, cfg, realization_rng(0, 0)) == counts
    assert spam_postprocess({}, cfg, realization_rng(0, 0)) == {}


def test_readout_distribution_matches_sampling():
    cfg = NoiseConfig(eta=0.0, epsilon=0.05, epsilon_prime=0.1)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    dist = readout_distribution(p, cfg)
    assert dist.sum() == pytest.approx(1.0)
    counts = {f"{i >> 1}{i & 1}": int(round(x * N_DRAWS)) for i, x in enumerate(p)}
    out = spam_postprocess(counts, cfg, realization_rng(4, 0))
    for i in range(4):
        assert within_binomial(out.get(f"{i >> 1}{i & 1}", 0), N_DRAWS, dist[i], z=4)
    lost = readout_distribution(p, NoiseConfig(epsilon=0.0, epsilon_prime=0.0), prepared=(False, True))
    # atom 0 (q0) failed preparation, so only the q1 marginal survives
    assert np.allclose(lost, [0.3, 0.0, 0.7, 0.0])
    assert np.allclose(confusion_matrix(cfg).sum(axis=0), 1)


# --- ensembles -----------------------------------------------------------------------


def test_noiseless_ensemble_has_zero_spread():
    seqs = small_sequences()
    cfg = NoiseConfig.noiseless(n_realizations=5, shots=0)
    stats = monte_carlo(seqs, DEV, None, cfg)
    assert np.all(stats.std == 0)
    ideal = [qubit_populations(simulate_sequence(s, DEV, record="final")[-1]) for s in seqs]
    assert np.allclose(stats.mean, ideal, atol=1e-12)


def test_mitigation_inverts_readout_errors():
    seqs = small_sequences()
    cfg = NoiseConfig(eta=0.0, n_realizations=3, shots=0, mitigate_readout=True).only("spam")
    stats = monte_carlo(seqs, DEV, None, cfg)
    ideal = [qubit_populations(simulate_sequence(s, DEV, record="final")[-1]) for s in seqs]
    assert np.allclose(stats.mean, ideal, atol=1e-12)


def test_ensemble_is_deterministic_across_runs_and_workers(monkeypatch):
    seqs = small_sequences()
    cfg = NoiseConfig(n_realizations=6, seed=17)
    monkeypatch.setenv("DQPT_THREADS", "1")
    a = monte_carlo(seqs, DEV, None, cfg, keep_samples=True)
    b = monte_carlo(seqs, DEV, None, cfg, keep_samples=True)
    monkeypatch.setenv("DQPT_THREADS", "2")
    c = monte_carlo(seqs, DEV, None, cfg, keep_samples=True)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.samples, c.samples)
    assert a.to_csv() == c.to_csv()
    d = monte_carlo(seqs, DEV, None, NoiseConfig(n_realizations=6, seed=18))
    assert not np.array_equal(a.mean, d.mean)


def test_box_stats_and_export():
    x = np.array([0.1, 0.2, 0.2, 0.3, 0.4, 5.0])
    b = box_stats(x)
    assert b.whisker_low <= b.q1 <= b.median <= b.q3 <= b.whisker_high
    assert b.whisker_high == 0.4
    seqs = small_sequences()
    stats = monte_carlo(seqs, DEV, None, NoiseConfig(n_realizations=4), "combined")
    assert np.all(stats.std >= 0)
    rows = fluctuation_boxplots({"combined": stats})
    assert len(rows) == 4
    csv_text = boxplots_to_csv(rows)
    assert csv_text.splitlines()[0].startswith("model,state,median,q1,q3")
