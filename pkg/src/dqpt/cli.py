"""Scenario runner: ``dqpt scan|exact|circuit|pulse|stats --config FILE --seed N --out DIR``.

Each command writes CSV data plus ``manifest.json`` holding the verbatim
scenario, seed and package version, enough to re-run bit-identically. Thread
count for parallel stages is capped by the ``DQPT_THREADS`` environment
variable.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import circuit_unitary, encoded_initial_state, populations, simulate_circuit, trotter_step
from .noise import NoiseConfig, fluctuation_boxplots, monte_carlo
from .pulse import DeviceConfig, compile_to_pulses, qubit_populations, simulate_sequence
from .quench import (
    ECHO_FLOOR,
    QuenchSpec,
    fit_loci_regression,
    populations_exact,
    rescale_factor,
    scan_zero_loci,
)
from .synthesis import synthesize_circuit

PIPELINES = ("exact", "circuit", "pulse")
PRESETS = ("case1", "case2", "loci")
NOISE_MODELS = {
    "spam": ("spam",),
    "doppler": ("doppler",),
    "amplitude": ("amplitude",),
    "combined": ("spam", "doppler", "amplitude"),
}


@dataclass(frozen=True)
class ScanGrid:
    m_min: float = -1.5
    m_max: float = -0.05
    n_m: int = 40
    g_min: float = 0.05
    g_max: float = 2.0
    n_g: int = 40
    t_max: float = 25.0
    n_times: int = 2501
    zero_threshold: float = 1e-3


@dataclass(frozen=True)
class Scenario:
    name: str
    m_over_j: float = -1.49
    g_over_j: float = 1.7
    n_trotter_steps: int = 125
    dt_rescaled: float = 0.1
    subsample_every: int = 1
    trotter_order: int = 2
    pipeline: str = "exact"
    noise: NoiseConfig | None = None
    device: DeviceConfig = field(default_factory=DeviceConfig)
    scan: ScanGrid = field(default_factory=ScanGrid)

    def __post_init__(self):
        if self.dt_rescaled <= 0:
            raise ValueError("dt_rescaled must be positive")
        if self.subsample_every < 1:
            raise ValueError("subsample_every must be >= 1")
        if self.n_trotter_steps < 0:
            raise ValueError("n_trotter_steps must be non-negative")
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if self.pipeline == "exact" and self.noise is not None and self.noise.enabled:
            raise ValueError("noise cannot be combined with the exact pipeline")

    @property
    def steps(self) -> np.ndarray:
        """Trotter step indices at which populations are reported."""
        return np.arange(0, self.n_trotter_steps + 1, self.subsample_every)

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.dt_rescaled

    @property
    def xi(self) -> float:
        return 1 / self.g_over_j**2

    @property
    def mu(self) -> float:
        return self.m_over_j / self.g_over_j**2

    @property
    def dt_gate(self) -> float:
        """Trotter step in the units of the rescaled block Hamiltonian."""
        return self.dt_rescaled * self.g_over_j**2 / rescale_factor(self.m_over_j)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "m_over_j": self.m_over_j,
            "g_over_j": self.g_over_j,
            "n_trotter_steps": self.n_trotter_steps,
            "dt_rescaled": self.dt_rescaled,
            "subsample_every": self.subsample_every,
            "trotter_order": self.trotter_order,
            "pipeline": self.pipeline,
            "noise": None if self.noise is None else self.noise.to_dict(),
            "device": json.loads(self.device.to_json()),
            "scan": asdict(self.scan),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        noise = d.pop("noise", None)
        device = d.pop("device", None)
        scan = d.pop("scan", None)
        return cls(
            noise=None if noise is None else NoiseConfig.from_dict(noise),
            device=DeviceConfig() if device is None else DeviceConfig.from_json(json.dumps(device)),
            scan=ScanGrid() if scan is None else ScanGrid(**scan),
            **d,
        )


def load_scenario(path_or_preset: str) -> Scenario:
    """Read a scenario from a JSON file, or from a shipped preset by name."""
    p = Path(path_or_preset)
    if p.exists():
        return Scenario.from_dict(json.loads(p.read_text()))
    name = p.stem if p.suffix == ".json" else path_or_preset
    if name in PRESETS:
        text = resources.files("dqpt.presets").joinpath(f"{name}.json").read_text()
        return Scenario.from_dict(json.loads(text))
    raise FileNotFoundError(f"no scenario file or preset named {path_or_preset!r}")


# --- pipelines ---------------------------------------------------------------


@dataclass
class Results:
    scenario: Scenario
    command: str
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _step_circuits(s: Scenario):
    """Compressed circuit for every reported step, from powers of one step's unitary."""
    U1 = circuit_unitary(trotter_step(s.xi, s.mu, s.dt_gate, s.trotter_order))
    for k in s.steps:
        yield synthesize_circuit(np.linalg.matrix_power(U1, int(k)), {"steps": int(k)})


def exact_populations(s: Scenario) -> np.ndarray:
    spec = QuenchSpec.for_couplings(s.m_over_j, s.g_over_j, s.times)
    return populations_exact(spec)


def circuit_populations(s: Scenario) -> np.ndarray:
    step = trotter_step(s.xi, s.mu, s.dt_gate, s.trotter_order).repeat(max(int(s.steps[-1]), 1))
    states = simulate_circuit(step, encoded_initial_state(0), at="boundaries")
    pops = populations(states)
    return pops[s.steps]


def pulse_sequences(s: Scenario):
    return [compile_to_pulses(c, s.device) for c in _step_circuits(s)]


def pulse_populations(s: Scenario) -> np.ndarray:
    return np.array(
        [qubit_populations(simulate_sequence(q, s.device, record="final")[-1]) for q in pulse_sequences(s)]
    )


def _population_table(s: Scenario, pops: np.ndarray, std: np.ndarray | None = None):
    cols = ["timeStep", "rescaledTime", "pop1", "pop2", "pop3", "pop4", "echo", "rate", "clamped"]
    if std is not None:
        cols += ["std1", "std2", "std3", "std4"]
    rows = []
    for i, (k, t) in enumerate(zip(s.steps, s.times)):
        echo = float(pops[i, 0])
        clamped = echo < ECHO_FLOOR
        rate = 0.0 - np.log(max(echo, ECHO_FLOOR)) / 2
        row = [int(k), t, *pops[i], echo, rate, int(clamped)]
        if std is not None:
            row += list(std[i])
        rows.append(row)
    return cols, rows


def _stats_table(s: Scenario, stats):
    rows = []
    for i, k in enumerate(s.steps):
        for st in range(4):
            rows.append([int(k), st + 1, stats.mean[i, st], stats.std[i, st]])
    return ["timeStep", "state", "mean", "std"], rows


def run_scenario(s: Scenario, command: str | None = None) -> Results:
    """Run the scenario's pipeline (or ``command`` if given) and collect tables."""
    command = command or ("scan" if s.name == "loci" else s.pipeline)
    res = Results(s, command)
    if command == "scan":
        g = s.scan
        pts = scan_zero_loci(
            np.linspace(g.m_min, g.m_max, g.n_m),
            np.linspace(g.g_min, g.g_max, g.n_g),
            (0.0, g.t_max),
            g.n_times,
            g.zero_threshold,
        )
        rows = [[p.m_over_j, p.g_over_j, i, t] for p in pts for i, t in enumerate(p.critical_times)]
        res.tables["loci"] = (["mOverJ", "gOverJ", "criticalTimeIndex", "rescaledTime"], rows)
        try:
            a, b = fit_loci_regression(pts)
            res.summary["regression"] = {"intercept": a, "slope": b}
        except ValueError as e:
            res.summary["regression"] = {"error": str(e)}
        res.summary["n_points"] = len(pts)
        return res
    if command == "exact":
        if s.noise is not None and s.noise.enabled:
            raise ValueError("noise cannot be combined with the exact pipeline")
        res.tables["populations"] = _population_table(s, exact_populations(s))
        return res
    if command == "circuit":
        res.tables["populations"] = _population_table(s, circuit_populations(s))
        return res
    if command == "pulse":
        if s.noise is None or not s.noise.enabled:
            res.tables["populations"] = _population_table(s, pulse_populations(s))
            return res
        seqs = pulse_sequences(s)
        stats = monte_carlo(seqs, s.device, None, s.noise, "combined")
        res.tables["populations"] = _population_table(s, stats.mean, stats.std)
        res.tables["stats"] = _stats_table(s, stats)
        return res
    if command == "stats":
        base = s.noise or NoiseConfig()
        seqs = pulse_sequences(s)
        runs = {}
        for model, sources in NOISE_MODELS.items():
            stats = monte_carlo(seqs, s.device, None, base.only(*sources), model)
            runs[model] = stats
            cols, rows = _stats_table(s, stats)
            res.tables[f"stats_{model}"] = (cols, rows)
        box = fluctuation_boxplots(runs)
        cols = ["model", "state", "median", "q1", "q3", "whisker_low", "whisker_high"]
        res.tables["boxplots"] = (cols, [[r[c] for c in cols] for r in box])
        res.tables["populations"] = _population_table(s, pulse_populations(s))
        return res
    raise ValueError(f"unknown command {command!r}")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def emit_report(results: Results, out: str | Path) -> list[Path]:
    """Write one CSV per table and ``manifest.json`` into ``out``."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e}") from e
    written = []
    for name, (cols, rows) in results.tables.items():
        path = out / f"{name}.csv"
        try:
            with path.open("w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(cols)
                for r in rows:
                    w.writerow([_fmt(v) for v in r])
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e
        written.append(path)
    manifest = {
        "command": results.command,
        "version": __version__,
        "seed": None if results.scenario.noise is None else results.scenario.noise.seed,
        "scenario": results.scenario.to_dict(),
        "summary": results.summary,
        "files": [p.name for p in written],
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    written.append(mpath)
    return written


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="dqpt", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["scan", "exact", "circuit", "pulse", "stats"])
    ap.add_argument("--config", required=True, help="scenario JSON file or preset name (case1, case2, loci)")
    ap.add_argument("--seed", type=int, default=None, help="override the noise seed")
    ap.add_argument("--out", required=True, help="output directory")
    args = ap.parse_args(argv)
    try:
        s = load_scenario(args.config)
        if args.seed is not None:
            s = replace(s, noise=replace(s.noise or NoiseConfig(), seed=args.seed))
        files = emit_report(run_scenario(s, args.command), args.out)
    except (ValueError, OSError) as e:
        print(f"dqpt: error: {e}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
