"""Monte Carlo experiment harness.

An experiment sweeps one variable (element count or power budget) over a set
of architectures with ``n_trials`` independent channel realizations. Within a
(sweep value, trial) cell every architecture consumes the identical channel
set and beamformer; channels are drawn with seed ``seed_base + trial``, so a
spec fully determines the results regardless of worker count.

Outputs are CSV files plus a JSON manifest. ``results.csv`` contains only
deterministic columns (wall-clock timings go to the manifest, which is the
one volatile output file): rerunning the same spec reproduces it byte for
byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelSet, generate_channels
from .config import Geometry, SystemConfig, config_from_dict, config_to_dict
from .optimizer import OptimizerTrace, cga_optimize, write_trace_csv
from .system import init_beamformer_uniform, parse_architecture_tag

SWEEP_VARIABLES = ("n_elements", "p_max")


@dataclass(frozen=True)
class ExperimentSpec:
    config: SystemConfig
    geometry: Geometry
    architectures: tuple[str, ...]
    sweep_variable: str
    sweep_values: tuple
    n_trials: int
    seed_base: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(
                f"sweep variable must be one of {SWEEP_VARIABLES}")
        if not self.architectures:
            raise ValueError("at least one architecture is required")
        if not self.sweep_values:
            raise ValueError("at least one sweep value is required")
        for value in self.sweep_values:
            if self.sweep_variable == "n_elements":
                if not isinstance(value, int) or value < 1:
                    raise ValueError(
                        f"n_elements sweep values must be positive integers, got {value!r}")
            elif not value > 0:
                raise ValueError(
                    f"p_max sweep values must be positive, got {value!r}")


@dataclass(frozen=True)
class ResultRow:
    architecture: str
    sweep_value: float | int
    trial: int
    seed: int
    sum_rate_bits: float
    iters: int
    wall_time_s: float
    converged: bool
    channel_digest: str


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    """Read an experiment spec file (YAML/JSON)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"experiment spec {path} must contain a mapping")
    config_raw = dict(raw.get("config", {}))
    if "geometry" in raw:
        config_raw["geometry"] = raw["geometry"]
    config, geometry = config_from_dict(config_raw)
    sweep = raw.get("sweep")
    if sweep is None:
        sweep = {"variable": "n_elements", "values": [config.n_elements]}
    values = sweep["values"]
    if sweep["variable"] == "n_elements":
        values = [int(v) for v in values]
    else:
        values = [float(v) for v in values]
    return ExperimentSpec(
        config=config,
        geometry=geometry,
        architectures=tuple(raw["architectures"]),
        sweep_variable=sweep["variable"],
        sweep_values=tuple(values),
        n_trials=int(raw["n_trials"]),
        seed_base=int(raw.get("seed_base", 0)),
        output_dir=raw.get("output_dir"))


def _neutral_config(config: SystemConfig, sweep_variable: str, value) -> SystemConfig:
    """Cell config before the architecture is chosen (group count 1)."""
    if sweep_variable == "n_elements":
        return replace(config, n_elements=int(value), n_groups=1)
    return replace(config, p_max=float(value), n_groups=1)


def channel_digest(channels: ChannelSet) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(channels.h_tx).tobytes())
    digest.update(np.ascontiguousarray(channels.h_rx).tobytes())
    return digest.hexdigest()


def _run_cell(args) -> tuple[list[ResultRow], list[dict]]:
    """All architectures of one (sweep value, trial) cell on shared channels."""
    spec, value, trial = args
    seed = spec.seed_base + trial
    base = _neutral_config(spec.config, spec.sweep_variable, value)
    channels = generate_channels(base, spec.geometry, seed)
    digest = channel_digest(channels)
    beam = init_beamformer_uniform(base)
    rows: list[ResultRow] = []
    skipped: list[dict] = []
    for tag in spec.architectures:
        try:
            _, group_size = parse_architecture_tag(tag, base.n_elements)
        except ValueError as exc:
            skipped.append({"architecture": tag, "sweep_value": value,
                            "trial": trial, "reason": str(exc)})
            continue
        cell_config = replace(base, n_groups=base.n_elements // group_size)
        started = time.perf_counter()
        _, trace = cga_optimize(channels, beam, cell_config, seed)
        elapsed = time.perf_counter() - started
        rows.append(ResultRow(
            architecture=tag,
            sweep_value=value,
            trial=trial,
            seed=seed,
            sum_rate_bits=trace.final.projected_rate,
            iters=trace.final.iters_used,
            wall_time_s=elapsed,
            converged=trace.final.converged,
            channel_digest=digest))
    return rows, skipped


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Run the full (sweep value, trial, architecture) grid.

    Cells are independent jobs; seeds derive from trial indices, so the table
    does not depend on ``workers``. Architecture/value combinations that do
    not divide evenly are reported in ``table.skipped`` and the run continues.
    """
    jobs = [(spec, value, trial)
            for value in spec.sweep_values
            for trial in range(spec.n_trials)]
    table = ResultTable()
    if workers <= 1:
        outcomes = map(_run_cell, jobs)
        for rows, skipped in outcomes:
            table.rows.extend(rows)
            table.skipped.extend(skipped)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows, skipped in pool.map(_run_cell, jobs):
                table.rows.extend(rows)
                table.skipped.extend(skipped)
    return table


def empirical_cdf(values: np.ndarray) -> np.ndarray:
    """Pairs (sorted value, k/n) for k = 1..n."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empirical_cdf requires a non-empty input")
    ordered = np.sort(values)
    probabilities = np.arange(1, ordered.size + 1) / ordered.size
    return np.column_stack([ordered, probabilities])


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def emit_outputs(table: ResultTable, traces: list[OptimizerTrace],
                 output_dir: str | Path,
                 spec: ExperimentSpec | None = None) -> list[Path]:
    """Write results.csv, per-architecture CDFs, trace files, and a manifest.

    Everything except the manifest (which carries wall-clock timings and a
    timestamp) is byte-reproducible for identical inputs.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    results_path = out / "results.csv"
    with open(results_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["architecture", "sweep_value", "trial", "seed",
                         "sum_rate_bits", "iters", "converged", "baseline"])
        for row in table.rows:
            writer.writerow([row.architecture, _format(row.sweep_value),
                             row.trial, row.seed, _format(row.sum_rate_bits),
                             row.iters, _format(row.converged), ""])
    written.append(results_path)

    architectures = []
    for row in table.rows:
        if row.architecture not in architectures:
            architectures.append(row.architecture)
    for tag in architectures:
        rates = np.array([r.sum_rate_bits for r in table.rows
                          if r.architecture == tag])
        cdf = empirical_cdf(rates)
        cdf_path = out / f"cdf_{tag}.csv"
        with open(cdf_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sum_rate_bits", "probability"])
            for value, probability in cdf:
                writer.writerow([repr(float(value)), repr(float(probability))])
        written.append(cdf_path)

    for trace in traces:
        if trace.architecture is None or trace.trial is None:
            raise ValueError("traces passed to emit_outputs need "
                             "architecture and trial labels")
        trace_path = out / f"trace_{trace.architecture}_{trace.trial}.csv"
        write_trace_csv(trace, trace_path)
        written.append(trace_path)

    digests = {}
    timings = {}
    for row in table.rows:
        digests[f"{row.sweep_value}/{row.trial}"] = row.channel_digest
        timings[f"{row.architecture}/{row.sweep_value}/{row.trial}"] = row.wall_time_s
    manifest = {
        "package": {"name": "bdris", "version": _package_version()},
        "environment": {"python": platform.python_version(),
                        "numpy": np.__version__},
        "experiment": manifest_with_spec(spec) if spec is not None else None,
        "seeds": sorted({row.seed for row in table.rows}),
        "channel_digests": digests,
        "skipped_cells": table.skipped,
        "timings_s": timings,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(manifest_path)
    return written


def manifest_with_spec(spec: ExperimentSpec) -> dict:
    """Spec echo for inclusion in run metadata."""
    return {
        "config": config_to_dict(spec.config, spec.geometry),
        "architectures": list(spec.architectures),
        "sweep": {"variable": spec.sweep_variable,
                  "values": list(spec.sweep_values)},
        "n_trials": spec.n_trials,
        "seed_base": spec.seed_base,
    }


def _package_version() -> str:
    from . import __version__
    return __version__


def run_convergence_traces(config: SystemConfig, geometry: Geometry,
                           architectures: list[str], seeds: list[int],
                           ) -> tuple[ResultTable, list[OptimizerTrace]]:
    """One labeled trace per (architecture, seed) on shared channels."""
    table = ResultTable()
    traces: list[OptimizerTrace] = []
    for trial, seed in enumerate(seeds):
        base = _neutral_config(config, "n_elements", config.n_elements)
        channels = generate_channels(base, geometry, seed)
        digest = channel_digest(channels)
        beam = init_beamformer_uniform(base)
        for tag in architectures:
            try:
                _, group_size = parse_architecture_tag(tag, base.n_elements)
            except ValueError as exc:
                table.skipped.append({"architecture": tag,
                                      "sweep_value": base.n_elements,
                                      "trial": trial, "reason": str(exc)})
                continue
            cell_config = replace(base, n_groups=base.n_elements // group_size)
            started = time.perf_counter()
            _, trace = cga_optimize(channels, beam, cell_config, seed)
            elapsed = time.perf_counter() - started
            trace.architecture = tag
            trace.trial = seed
            traces.append(trace)
            table.rows.append(ResultRow(
                architecture=tag, sweep_value=base.n_elements, trial=trial,
                seed=seed, sum_rate_bits=trace.final.projected_rate,
                iters=trace.final.iters_used, wall_time_s=elapsed,
                converged=trace.final.converged, channel_digest=digest))
    return table, traces
