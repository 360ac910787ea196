"""JSON run configuration: parsing, defaults and validation.

Every validation failure names the offending field path, e.g.
``noise.visibility: must lie in [0, 1], got 1.2``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import NAMED_QUBIT_STATES, DensityMatrix, PureState, StateLike, convex_mixture
from .hom import NoiseModel

EXPERIMENTS = ("tomography", "chsh", "hom-scan", "qwalk-synth", "entangle")
FORMATS = ("csv", "json")
SEED_MAX = 2**64 - 1
_BIN_NAME = re.compile(r"^t(\d+)$")


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigSyntaxError(ConfigError):
    pass


class UnknownExperimentError(ConfigError):
    pass


class ConfigRangeError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class StateSpecError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RunConfig:
    experiment: str
    seed: int
    noise: NoiseModel
    params: dict[str, Any]
    output_path: str | None
    format: str
    resolved: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def normalized_input(self) -> bool:
        return any("normalized" in w for w in self.warnings)


# -- small validators ---------------------------------------------------------


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigRangeError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigRangeError(path, f"must be finite, got {value!r}")
    return float(value)


def _integer(value: Any, path: str, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigRangeError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigRangeError(path, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigRangeError(path, f"must be <= {hi}, got {value}")
    return value


def _in_range(value: Any, path: str, lo: float, hi: float, lo_open: bool = False, hi_open: bool = False) -> float:
    x = _number(value, path)
    if (x < lo or (lo_open and x == lo)) or (x > hi or (hi_open and x == hi)):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ConfigRangeError(path, f"must lie in {lb}{lo}, {hi}{rb}, got {value!r}")
    return x


def _mapping(value: Any, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigRangeError(path, f"expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        prefix = f"{path}." if path else ""
        raise ConfigRangeError(f"{prefix}{extra[0]}", f"unknown key (allowed: {', '.join(sorted(allowed))})")


# -- states -------------------------------------------------------------------


def _complex_entry(value: Any, path: str) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise StateSpecError(path, "complex amplitudes are written as [re, im]")
        return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))
    return complex(_number(value, path))


def parse_pure_state(spec: Any, path: str, warnings: list[str], dim: int | None = None) -> PureState:
    """Named state (``t0``, ``plus``, ..., ``t<k>`` for qudits) or an amplitude list."""
    if isinstance(spec, str):
        if spec in NAMED_QUBIT_STATES and (dim is None or dim == 2):
            return NAMED_QUBIT_STATES[spec]
        m = _BIN_NAME.match(spec)
        if m:
            k = int(m.group(1))
            d = dim if dim is not None else max(2, k + 1)
            if k >= d:
                raise StateSpecError(path, f"time bin {k} does not exist in dimension {d}")
            return PureState.basis_state(d, k)
        raise StateSpecError(path, f"unknown named state {spec!r} (known: {', '.join(NAMED_QUBIT_STATES)}, t<k>)")
    if isinstance(spec, (list, tuple)):
        if not spec:
            raise StateSpecError(path, "amplitude list is empty")
        amps = np.array([_complex_entry(v, f"{path}[{i}]") for i, v in enumerate(spec)])
        if dim is not None and amps.size != dim:
            raise StateSpecError(path, f"expected {dim} amplitudes, got {amps.size}")
        norm = float(np.linalg.norm(amps))
        if norm == 0.0:
            raise StateSpecError(path, "amplitudes are all zero and cannot be normalized")
        if abs(norm - 1.0) > 1e-12:
            warnings.append(f"{path}: amplitudes normalized (input norm {norm:.12g})")
        return PureState(amps / norm)
    raise StateSpecError(path, f"expected a state name or amplitude list, got {type(spec).__name__}")


def parse_state(spec: Any, path: str, warnings: list[str]) -> StateLike:
    """Pure state spec, ``"maximally_mixed"``, or ``{"mixture": [{"state": ..., "weight": w}, ...]}``."""
    if spec == "maximally_mixed":
        return DensityMatrix.maximally_mixed(2)
    if isinstance(spec, dict):
        _reject_unknown(spec, {"mixture"}, path)
        items = spec.get("mixture")
        if not isinstance(items, list) or not items:
            raise StateSpecError(f"{path}.mixture", "expected a non-empty list of {state, weight} objects")
        comps = []
        for i, item in enumerate(items):
            ipath = f"{path}.mixture[{i}]"
            item = _mapping(item, ipath)
            _reject_unknown(item, {"state", "weight"}, ipath)
            if "state" not in item or "weight" not in item:
                raise StateSpecError(ipath, "needs both 'state' and 'weight'")
            w = _in_range(item["weight"], f"{ipath}.weight", 0.0, 1.0)
            comps.append((parse_pure_state(item["state"], f"{ipath}.state", warnings), w))
        total = sum(w for _, w in comps)
        if abs(total - 1.0) > 1e-12:
            raise ConfigRangeError(f"{path}.mixture", f"weights sum to {total!r}, expected 1")
        return convex_mixture(comps)
    return parse_pure_state(spec, path, warnings)


def state_to_json(state: StateLike) -> Any:
    if isinstance(state, PureState):
        return {"amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes]}
    return {"density_matrix": [[[float(x.real), float(x.imag)] for x in row] for row in state.matrix]}


# -- per-experiment params ------------------------------------------------------


def _delays(spec: Any, path: str) -> list[float]:
    if isinstance(spec, dict):
        _reject_unknown(spec, {"start", "stop", "step"}, path)
        start = _number(spec.get("start", -20.0), f"{path}.start")
        stop = _number(spec.get("stop", 20.0), f"{path}.stop")
        step = _number(spec.get("step", 0.5), f"{path}.step")
        if step <= 0:
            raise ConfigRangeError(f"{path}.step", f"must be > 0, got {step}")
        if stop < start:
            raise ConfigRangeError(f"{path}.stop", "must be >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n > 100_000:
            raise ConfigRangeError(path, f"grid has {n} points (max 100000)")
        return [round(start + i * step, 12) for i in range(n)]
    if isinstance(spec, list) and spec:
        return [_number(v, f"{path}[{i}]") for i, v in enumerate(spec)]
    raise ConfigRangeError(path, "expected a non-empty list or {start, stop, step}")


def _refs(spec: Any, path: str, warnings: list[str], dim: int) -> list[tuple[str, PureState]]:
    if spec == "mub":
        if dim != 2:
            raise ConfigRangeError(path, "'mub' references are only defined for n = 2")
        return list(NAMED_QUBIT_STATES.items())
    if not isinstance(spec, list) or not spec:
        raise ConfigRangeError(path, "expected 'mub' or a non-empty list of states")
    out = []
    for i, s in enumerate(spec):
        label = s if isinstance(s, str) else f"ref_{i}"
        out.append((label, parse_pure_state(s, f"{path}[{i}]", warnings, dim=dim)))
    return out


def _parse_params(experiment: str, raw: dict, warnings: list[str]) -> tuple[dict, dict]:
    """Return (typed params, JSON-resolved params)."""
    p = "params"
    if experiment == "tomography":
        _reject_unknown(raw, {"target", "states", "suite", "normalization", "suite_seed"}, p)
        norm = raw.get("normalization", "a")
        if norm not in ("a", "poisson"):
            raise ConfigRangeError(f"{p}.normalization", f"must be 'a' or 'poisson', got {norm!r}")
        states: list[tuple[str, StateLike]] = []
        suite = raw.get("suite")
        if suite is not None and suite != "48":
            raise ConfigRangeError(f"{p}.suite", f"only the '48' suite exists, got {suite!r}")
        suite_seed = _integer(raw.get("suite_seed", 2024), f"{p}.suite_seed", 0, SEED_MAX)
        if suite == "48":
            from .tomography import state_suite

            states.extend(state_suite(suite_seed))
        if "target" in raw:
            target = raw["target"]
            label = target if isinstance(target, str) else "target"
            states.append((label, parse_state(target, f"{p}.target", warnings)))
        spec_list = raw.get("states", [])
        if not isinstance(spec_list, list):
            raise ConfigRangeError(f"{p}.states", "expected a list")
        for i, spec in enumerate(spec_list):
            path = f"{p}.states[{i}]"
            label = spec if isinstance(spec, str) else f"state_{i}"
            if isinstance(spec, dict) and "id" in spec:
                label = str(spec["id"])
                spec = spec.get("state")
                path = f"{path}.state"
            states.append((label, parse_state(spec, path, warnings)))
        if not states:
            raise ConfigRangeError(f"{p}.states", "no states given (use 'target', 'states' and/or 'suite': '48')")
        for label, st in states:
            d = st.dim if isinstance(st, (PureState, DensityMatrix)) else 0
            if d != 2:
                raise ConfigRangeError(f"{p}.states", f"tomography targets must be qubits; {label!r} has dimension {d}")
        typed = {"states": states, "normalization": norm}
        resolved = {
            "normalization": norm,
            "suite": suite,
            "suite_seed": suite_seed,
            "states": [{"id": label, **state_to_json(st)} for label, st in states],
        }
        return typed, resolved

    if experiment == "chsh":
        _reject_unknown(raw, {"shots_per_setting", "state_visibility", "settings"}, p)
        shots = _integer(raw.get("shots_per_setting", 1_000_000), f"{p}.shots_per_setting", 1, 10**12)
        v = _in_range(raw.get("state_visibility", 1.0), f"{p}.state_visibility", 0.0, 1.0)
        settings = raw.get("settings", "optimal")
        if settings != "optimal":
            raise ConfigRangeError(f"{p}.settings", f"only 'optimal' settings are supported, got {settings!r}")
        typed = {"shots_per_setting": shots, "state_visibility": v}
        return typed, {**typed, "settings": "optimal"}

    if experiment == "hom-scan":
        _reject_unknown(raw, {"target", "reference", "delays", "bin_spacing", "coherence_time"}, p)
        target = parse_state(raw.get("target", "t0"), f"{p}.target", warnings)
        ref = parse_pure_state(raw.get("reference", "t0"), f"{p}.reference", warnings)
        if target.dim != ref.dim:
            raise ConfigRangeError(f"{p}.reference", f"dimension {ref.dim} does not match target dimension {target.dim}")
        delays = _delays(raw.get("delays", {"start": -20.0, "stop": 20.0, "step": 0.5}), f"{p}.delays")
        spacing = _number(raw.get("bin_spacing", 8.0), f"{p}.bin_spacing")
        coh = _number(raw.get("coherence_time", 2.3), f"{p}.coherence_time")
        if spacing <= 0:
            raise ConfigRangeError(f"{p}.bin_spacing", f"must be > 0, got {spacing}")
        if coh <= 0:
            raise ConfigRangeError(f"{p}.coherence_time", f"must be > 0, got {coh}")
        typed = {"target": target, "reference": ref, "delays": delays, "bin_spacing": spacing, "coherence_time": coh}
        resolved = {
            "target": state_to_json(target),
            "reference": state_to_json(ref),
            "delays": delays,
            "bin_spacing": spacing,
            "coherence_time": coh,
        }
        return typed, resolved

    if experiment == "qwalk-synth":
        _reject_unknown(raw, {"target", "n_steps", "restarts", "method"}, p)
        if "target" not in raw:
            raise StateSpecError(f"{p}.target", "required")
        target = parse_pure_state(raw["target"], f"{p}.target", warnings)
        n_steps = _integer(raw.get("n_steps", target.dim + 1), f"{p}.n_steps", max(1, target.dim - 1), 64)
        restarts = _integer(raw.get("restarts", 32), f"{p}.restarts", 1, 10_000)
        method = raw.get("method", "lbfgs")
        if method not in ("lbfgs", "nelder-mead"):
            raise ConfigRangeError(f"{p}.method", f"must be 'lbfgs' or 'nelder-mead', got {method!r}")
        typed = {"target": target, "n_steps": n_steps, "restarts": restarts, "method": method}
        return typed, {**typed, "target": state_to_json(target)}

    if experiment == "entangle":
        _reject_unknown(raw, {"pump", "alice_refs", "bob_refs"}, p)
        if "pump" in raw:
            pump = parse_pure_state(raw["pump"], f"{p}.pump", warnings)
        else:
            pump = PureState.from_unnormalized([1.0, 1.0])
        n = pump.dim
        alice = _refs(raw.get("alice_refs", "mub" if n == 2 else None), f"{p}.alice_refs", warnings, n)
        bob = _refs(raw.get("bob_refs", "mub" if n == 2 else None), f"{p}.bob_refs", warnings, n)
        typed = {"pump": pump, "alice_refs": alice, "bob_refs": bob}
        resolved = {
            "pump": state_to_json(pump)["amplitudes"],
            "alice_refs": [{"id": k, **state_to_json(s)} for k, s in alice],
            "bob_refs": [{"id": k, **state_to_json(s)} for k, s in bob],
        }
        return typed, resolved

    raise UnknownExperimentError(f"experiment: unknown experiment {experiment!r}")


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate a JSON run configuration.

    ``experiment`` (the CLI subcommand) fills in a missing ``experiment``
    key and must agree with it when both are given.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigSyntaxError("configuration must be a JSON object")
    _reject_unknown(raw, {"experiment", "seed", "noise", "params", "output"}, "")

    exp = raw.get("experiment", experiment)
    if exp is None:
        raise UnknownExperimentError("experiment: missing (set it in the config or on the command line)")
    if exp not in EXPERIMENTS:
        raise UnknownExperimentError(f"experiment: unknown experiment {exp!r} (choose from {', '.join(EXPERIMENTS)})")
    if experiment is not None and exp != experiment:
        raise UnknownExperimentError(f"experiment: config says {exp!r} but the command asked for {experiment!r}")

    seed = _integer(raw.get("seed", 0), "seed", 0, SEED_MAX)

    noise_raw = _mapping(raw.get("noise"), "noise")
    _reject_unknown(noise_raw, {"visibility", "accidental_rate", "mean_counts"}, "noise")
    vis = _in_range(noise_raw.get("visibility", 1.0), "noise.visibility", 0.0, 1.0)
    acc = _number(noise_raw.get("accidental_rate", 0.0), "noise.accidental_rate")
    if acc < 0:
        raise ConfigRangeError("noise.accidental_rate", f"must be >= 0, got {acc}")
    mean = _number(noise_raw.get("mean_counts", 1e4), "noise.mean_counts")
    if mean <= 0:
        raise ConfigRangeError("noise.mean_counts", f"must be > 0, got {mean}")
    noise = NoiseModel(vis, acc, mean)

    warnings: list[str] = []
    params, resolved_params = _parse_params(exp, _mapping(raw.get("params"), "params"), warnings)

    out_raw = _mapping(raw.get("output"), "output")
    _reject_unknown(out_raw, {"path", "format"}, "output")
    fmt = out_raw.get("format", "json")
    if fmt not in FORMATS:
        raise ConfigRangeError("output.format", f"must be 'csv' or 'json', got {fmt!r}")
    path = out_raw.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigRangeError("output.path", "expected a string")

    cfg = RunConfig(exp, seed, noise, params, path, fmt, warnings=warnings)
    cfg.resolved = resolve(cfg, resolved_params)
    return cfg


def resolve(cfg: RunConfig, resolved_params: dict | None = None) -> dict:
    params = resolved_params if resolved_params is not None else cfg.resolved.get("params", {})
    return {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "noise": {
            "visibility": cfg.noise.visibility,
            "accidental_rate": cfg.noise.accidental_rate,
            "mean_counts": cfg.noise.mean_counts,
        },
        "params": params,
        "output": {"path": cfg.output_path, "format": cfg.format},
    }
