"""Seeded experiment runners and deterministic result writers."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Callable

from .config import RunConfig
from .contextuality import chsh_value, optimal_settings, simulate_chsh, white_noise_state
from .core import as_density
from .entangle import PumpProfile, correlation_table, schmidt_coefficients, spdc_entangled_state
from .hom import TemporalModeModel, hom_scan, simulate_counts
from .qwalk import synthesize
from .tomography import MeasurementSchedule, run_tomography

SCHEMA_VERSION = 1


@dataclass
class ExperimentResult:
    """Scalar summary plus an optional table; both end up in CSV and JSON output."""

    summary: dict[str, Any]
    columns: list[str] = field(default_factory=list)
    rows: list[list[Any]] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)


def _cplx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _matrix(m) -> list:
    return [[_cplx(x) for x in row] for row in m]


def run_tomography_experiment(cfg: RunConfig) -> ExperimentResult:
    schedule = MeasurementSchedule.mub(cfg.noise)
    rows = []
    matrices = {}
    for i, (label, state) in enumerate(cfg.params["states"]):
        res = run_tomography(state, schedule, cfg.seed + i, cfg.params["normalization"])
        rows.append(
            [label, res.fidelity_to_target, as_density(state).purity(), res.rho.purity(), res.converged, res.iterations]
        )
        matrices[label] = _matrix(res.rho.matrix)
    fids = [r[1] for r in rows]
    return ExperimentResult(
        summary={"n_states": len(rows), "mean_fidelity": sum(fids) / len(fids), "min_fidelity": min(fids)},
        columns=["state_id", "fidelity", "purity_true", "purity_reconstructed", "converged", "iterations"],
        rows=rows,
        extra={"reconstructed": matrices},
    )


def run_chsh_experiment(cfg: RunConfig) -> ExperimentResult:
    state = white_noise_state(cfg.params["state_visibility"])
    settings = optimal_settings()
    res = simulate_chsh(state, settings, cfg.params["shots_per_setting"], cfg.seed, cfg.noise.visibility)
    labels = ["A0B0", "A0B1", "A1B0", "A1B1"]
    return ExperimentResult(
        summary={
            "s_value": res.s_value,
            "standard_error": res.standard_error,
            "s_analytic": chsh_value(state, settings),
        },
        columns=["setting", "correlator"],
        rows=[[k, e] for k, e in zip(labels, res.correlators)],
    )


def run_hom_scan_experiment(cfg: RunConfig) -> ExperimentResult:
    p = cfg.params
    model = TemporalModeModel(p["bin_spacing"], p["coherence_time"])
    points = hom_scan(p["target"], p["reference"], p["delays"], model, cfg.noise)
    rows = []
    for i, pt in enumerate(points):
        counts = simulate_counts(pt.p_antibunch, cfg.noise, cfg.seed + i)
        rows.append([pt.delay, pt.p_antibunch, pt.p_bunch, counts.antibunching, counts.bunching])
    p_min = min(r[1] for r in rows)
    return ExperimentResult(
        summary={"n_points": len(rows), "min_p_antibunch": p_min},
        columns=["delay_ps", "p_antibunch", "p_bunch", "counts_antibunch", "counts_bunch"],
        rows=rows,
    )


def run_qwalk_experiment(cfg: RunConfig) -> ExperimentResult:
    p = cfg.params
    res = synthesize(p["target"], p["n_steps"], p["restarts"], cfg.seed, p["method"])
    return ExperimentResult(
        summary={
            "fidelity": res.fidelity,
            "success_probability": res.success_probability,
            "objective": res.objective,
        },
        columns=["step", "theta", "phi1", "phi2"],
        rows=[[k, c.theta, c.phi1, c.phi2] for k, c in enumerate(res.coins)],
        extra={
            "projection": [_cplx(a) for a in res.projection.amplitudes],
            "walker": [_cplx(a) for a in res.walker.amplitudes],
        },
    )


def run_entangle_experiment(cfg: RunConfig) -> ExperimentResult:
    p = cfg.params
    pump = PumpProfile(p["pump"].amplitudes)
    state = spdc_entangled_state(pump)
    alice, bob = p["alice_refs"], p["bob_refs"]
    table = correlation_table(state, [s for _, s in alice], [s for _, s in bob], cfg.noise)
    rows = [[ka, kb, float(table[i, j])] for i, (ka, _) in enumerate(alice) for j, (kb, _) in enumerate(bob)]
    n = pump.n_bins
    return ExperimentResult(
        summary={"schmidt_coefficients": [float(c) for c in schmidt_coefficients(state, (n, n))]},
        columns=["alice_ref", "bob_ref", "p_joint_antibunch"],
        rows=rows,
    )


RUNNERS: dict[str, Callable[[RunConfig], ExperimentResult]] = {
    "tomography": run_tomography_experiment,
    "chsh": run_chsh_experiment,
    "hom-scan": run_hom_scan_experiment,
    "qwalk-synth": run_qwalk_experiment,
    "entangle": run_entangle_experiment,
}


def execute(cfg: RunConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)


def _cell(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def render_json(cfg: RunConfig, result: ExperimentResult) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config": cfg.resolved,
        "warnings": list(cfg.warnings),
        "results": {
            **result.summary,
            "table": {"columns": result.columns, "rows": result.rows},
            **result.extra,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def render_csv(cfg: RunConfig, result: ExperimentResult) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    buf.write(f"# experiment: {cfg.experiment}\n")
    buf.write(f"# seed: {cfg.seed}\n")
    buf.write(f"# config: {json.dumps(cfg.resolved, separators=(',', ':'))}\n")
    for w in cfg.warnings:
        buf.write(f"# warning: {w}\n")
    for k, v in result.summary.items():
        buf.write(f"# result.{k}: {json.dumps(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def render(cfg: RunConfig, result: ExperimentResult) -> str:
    return render_csv(cfg, result) if cfg.format == "csv" else render_json(cfg, result)
