import csv
import json
from dataclasses import replace

import pytest

from dqpt.cli import PRESETS, ScanGrid, Scenario, emit_report, load_scenario, main, run_scenario
from dqpt.noise import NoiseConfig


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def tiny_noisy(tmp_path):
    s = Scenario(
        "tiny",
        n_trotter_steps=4,
        pipeline="pulse",
        noise=NoiseConfig(n_realizations=3, seed=7),
    )
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(s.to_dict()))
    return s, path


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load_and_roundtrip(name):
    s = load_scenario(name)
    assert Scenario.from_dict(s.to_dict()) == s
    assert load_scenario(f"{name}.json") == s


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario("x", dt_rescaled=0.0)
    with pytest.raises(ValueError):
        Scenario("x", subsample_every=0)
    with pytest.raises(ValueError):
        Scenario("x", pipeline="analog")
    with pytest.raises(ValueError, match="exact"):
        Scenario("x", pipeline="exact", noise=NoiseConfig())
    with pytest.raises(FileNotFoundError):
        load_scenario("no-such-preset")


def test_noise_with_exact_command_is_a_config_error(tmp_path, capsys):
    assert main(["exact", "--config", "case1", "--out", str(tmp_path)]) == 2
    assert "exact" in capsys.readouterr().err


def test_manifest_roundtrip(tmp_path):
    s, _ = tiny_noisy(tmp_path)
    emit_report(run_scenario(s, "circuit"), tmp_path / "out")
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert Scenario.from_dict(manifest["scenario"]) == s
    assert manifest["seed"] == 7
    assert manifest["command"] == "circuit"
    assert set(manifest["files"]) == {"populations.csv"}


def test_population_schema_and_subsampling(tmp_path):
    s = Scenario("sub", n_trotter_steps=10, subsample_every=5)
    emit_report(run_scenario(s, "exact"), tmp_path)
    rows = read_csv(tmp_path / "populations.csv")
    assert list(rows[0]) == ["timeStep", "rescaledTime", "pop1", "pop2", "pop3", "pop4", "echo", "rate", "clamped"]
    assert [r["timeStep"] for r in rows] == ["0", "5", "10"]
    assert float(rows[0]["echo"]) == pytest.approx(1.0)
    assert float(rows[0]["rate"]) == pytest.approx(0.0, abs=1e-12)
    for r in rows:
        assert abs(sum(float(r[f"pop{i}"]) for i in range(1, 5)) - 1) < 1e-9


def test_noisy_pulse_run_is_byte_identical_and_joins(tmp_path, monkeypatch):
    _, path = tiny_noisy(tmp_path)
    monkeypatch.setenv("DQPT_THREADS", "1")
    assert main(["pulse", "--config", str(path), "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("DQPT_THREADS", "2")
    assert main(["pulse", "--config", str(path), "--out", str(tmp_path / "b")]) == 0
    for name in ("populations.csv", "stats.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    pops = read_csv(tmp_path / "a" / "populations.csv")
    stats = read_csv(tmp_path / "a" / "stats.csv")
    assert list(stats[0]) == ["timeStep", "state", "mean", "std"]
    assert {"std1", "std2", "std3", "std4"} <= set(pops[0])
    assert {r["timeStep"] for r in stats} == {r["timeStep"] for r in pops}
    by_step = {r["timeStep"]: r for r in pops}
    for r in stats:
        assert r["mean"] == by_step[r["timeStep"]][f"pop{r['state']}"]


def test_seed_override_changes_results(tmp_path):
    _, path = tiny_noisy(tmp_path)
    main(["pulse", "--config", str(path), "--out", str(tmp_path / "a")])
    main(["pulse", "--config", str(path), "--seed", "8", "--out", str(tmp_path / "b")])
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert (ma["seed"], mb["seed"]) == (7, 8)
    assert (tmp_path / "a" / "stats.csv").read_bytes() != (tmp_path / "b" / "stats.csv").read_bytes()


def test_stats_command_writes_every_model(tmp_path):
    s, _ = tiny_noisy(tmp_path)
    files = emit_report(run_scenario(s, "stats"), tmp_path)
    names = {p.name for p in files}
    assert {"stats_spam.csv", "stats_doppler.csv", "stats_amplitude.csv", "stats_combined.csv",
            "boxplots.csv", "populations.csv", "manifest.json"} <= names
    box = read_csv(tmp_path / "boxplots.csv")
    assert list(box[0]) == ["model", "state", "median", "q1", "q3", "whisker_low", "whisker_high"]
    assert len(box) == 16


def test_scan_command_on_small_grid(tmp_path):
    s = replace(load_scenario("loci"), scan=ScanGrid(n_m=6, n_g=8, n_times=1001))
    path = tmp_path / "loci.json"
    path.write_text(json.dumps(s.to_dict()))
    assert main(["scan", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "loci.csv")
    assert list(rows[0]) == ["mOverJ", "gOverJ", "criticalTimeIndex", "rescaledTime"]
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["summary"]["n_points"] == len({(r["mOverJ"], r["gOverJ"]) for r in rows}) > 0
    # too few loci on a coarse grid: the fit failure is reported, not raised
    assert "error" in manifest["summary"]["regression"]


def test_unwritable_output_reports_path(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["circuit", "--config", "case2", "--out", str(blocker / "sub")]) == 2
    assert str(blocker) in capsys.readouterr().err


@pytest.mark.slow
def test_shipped_presets_run_end_to_end(tmp_path):
    assert main(["scan", "--config", "loci", "--out", str(tmp_path / "loci")]) == 0
    assert main(["circuit", "--config", "case2", "--out", str(tmp_path / "case2")]) == 0
    assert main(["pulse", "--config", "case1", "--out", str(tmp_path / "case1")]) == 0
    rows = read_csv(tmp_path / "case1" / "populations.csv")
    assert len(rows) == 126
    fit = json.loads((tmp_path / "loci" / "manifest.json").read_text())["summary"]["regression"]
    assert fit["slope"] == pytest.approx(0.5, abs=0.05)
