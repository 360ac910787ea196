import csv
import json
import math

import numpy as np
import pytest
from scipy.signal import find_peaks

from timebin_lab.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main, run
from timebin_lab.config import (
    ConfigRangeError,
    ConfigSyntaxError,
    StateSpecError,
    UnknownExperimentError,
    parse_config,
)
from timebin_lab.core import PLUS, PureState


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    meta = [ln for ln in lines if ln.startswith("# ")]
    rows = list(csv.DictReader(ln for ln in lines if not ln.startswith("#")))
    return meta, rows


def test_minimal_tomography_config():
    cfg = parse_config(json.dumps({"experiment": "tomography", "params": {"target": "plus"}}))
    assert cfg.experiment == "tomography"
    (label, state), = cfg.params["states"]
    assert label == "plus"
    np.testing.assert_allclose(state.amplitudes, PLUS.amplitudes)
    assert cfg.warnings == []
    assert cfg.seed == 0 and cfg.format == "json"


def test_visibility_out_of_range_names_the_field():
    with pytest.raises(ConfigRangeError) as err:
        parse_config(json.dumps({"experiment": "chsh", "noise": {"visibility": 1.2}}))
    assert err.value.path == "noise.visibility"
    assert "noise.visibility" in str(err.value)


def test_unnormalized_amplitudes_are_normalized_with_warning():
    cfg = parse_config(json.dumps({"experiment": "tomography", "params": {"target": [1, 1]}}))
    (_, state), = cfg.params["states"]
    np.testing.assert_allclose(state.amplitudes, np.array([1, 1]) / math.sqrt(2))
    assert cfg.normalized_input
    assert any("params.target" in w for w in cfg.warnings)


def test_complex_amplitudes_as_pairs():
    cfg = parse_config(json.dumps({"experiment": "qwalk-synth", "params": {"target": [[1, 0], [0, 1], [0, 0]]}}))
    np.testing.assert_allclose(cfg.params["target"].amplitudes, np.array([1, 1j, 0]) / math.sqrt(2))
    assert cfg.params["n_steps"] == 4


@pytest.mark.parametrize(
    "text, error, fragment",
    [
        ("{not json", ConfigSyntaxError, "line 1"),
        ("[]", ConfigSyntaxError, "object"),
        ('{"experiment": "teleport"}', UnknownExperimentError, "teleport"),
        ("{}", UnknownExperimentError, "missing"),
        ('{"experiment": "chsh", "seed": -1}', ConfigRangeError, "seed"),
        ('{"experiment": "chsh", "seed": 18446744073709551616}', ConfigRangeError, "seed"),
        ('{"experiment": "chsh", "noise": {"mean_counts": 0}}', ConfigRangeError, "noise.mean_counts"),
        ('{"experiment": "chsh", "noise": {"accidental_rate": -0.1}}', ConfigRangeError, "noise.accidental_rate"),
        ('{"experiment": "chsh", "params": {"shots_per_setting": 0}}', ConfigRangeError, "params.shots_per_setting"),
        ('{"experiment": "chsh", "colour": 1}', ConfigRangeError, "colour"),
        ('{"experiment": "chsh", "output": {"format": "xml"}}', ConfigRangeError, "output.format"),
        ('{"experiment": "tomography", "params": {"target": [0, 0]}}', StateSpecError, "params.target"),
        ('{"experiment": "tomography", "params": {"target": "psi"}}', StateSpecError, "params.target"),
        ('{"experiment": "tomography", "params": {"target": [1, [0, 1, 2]]}}', StateSpecError, "params.target[1]"),
        ('{"experiment": "tomography", "params": {"target": [1, 0, 0]}}', ConfigRangeError, "qubits"),
        ('{"experiment": "tomography"}', ConfigRangeError, "params.states"),
        ('{"experiment": "qwalk-synth", "params": {"target": [1, 0, 0], "n_steps": 1}}', ConfigRangeError, "n_steps"),
        ('{"experiment": "hom-scan", "params": {"delays": {"step": 0}}}', ConfigRangeError, "params.delays.step"),
        ('{"experiment": "hom-scan", "params": {"reference": [1, 0, 0]}}', ConfigRangeError, "params.reference"),
        ('{"experiment": "entangle", "params": {"pump": [1, 0, 0]}}', ConfigRangeError, "params.alice_refs"),
    ],
)
def test_config_errors_are_distinct_and_actionable(text, error, fragment):
    with pytest.raises(error) as err:
        parse_config(text)
    assert fragment in str(err.value)


def test_mixture_state_spec():
    spec = {"mixture": [{"state": "t0", "weight": 0.25}, {"state": "t1", "weight": 0.75}]}
    cfg = parse_config(json.dumps({"experiment": "tomography", "params": {"states": [{"id": "m", "state": spec}]}}))
    (label, rho), = cfg.params["states"]
    assert label == "m"
    np.testing.assert_allclose(rho.matrix, np.diag([0.25, 0.75]))
    bad = {"mixture": [{"state": "t0", "weight": 0.5}, {"state": "t1", "weight": 0.4}]}
    with pytest.raises(ConfigRangeError):
        parse_config(json.dumps({"experiment": "tomography", "params": {"states": [bad]}}))


def test_experiment_mismatch_with_command():
    with pytest.raises(UnknownExperimentError):
        parse_config('{"experiment": "chsh"}', experiment="hom-scan")
    assert parse_config("{}", experiment="chsh").experiment == "chsh"


def test_chsh_run_reports_s_value(tmp_path):
    out = tmp_path / "chsh.json"
    cfg = write_config(tmp_path, {"experiment": "chsh", "seed": 3, "params": {"shots_per_setting": 1000000}})
    assert main(["chsh", "--config", cfg, "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    assert doc["seed"] == 3
    assert doc["config"]["params"]["shots_per_setting"] == 1000000
    assert doc["results"]["s_value"] == pytest.approx(2.8284, abs=0.01)
    assert doc["results"]["standard_error"] < 0.01


def test_hom_scan_csv_has_two_dips(tmp_path):
    out = tmp_path / "scan.csv"
    doc = {
        "experiment": "hom-scan",
        "noise": {"visibility": 0.985},
        "params": {"target": "plus", "reference": "t0", "delays": {"start": -20, "stop": 20, "step": 0.5}},
        "output": {"format": "csv"},
    }
    assert main(["hom-scan", "--config", write_config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    meta, rows = read_csv(out)
    assert list(rows[0]) == ["delay_ps", "p_antibunch", "p_bunch", "counts_antibunch", "counts_bunch"]
    assert any(m.startswith("# config: ") for m in meta)
    assert "# seed: 0" in meta
    delays = np.array([float(r["delay_ps"]) for r in rows])
    p = np.array([float(r["p_antibunch"]) for r in rows])
    dips, _ = find_peaks(-p, prominence=1e-4)
    np.testing.assert_allclose(delays[dips], [0, 8])
    np.testing.assert_allclose(p[dips], 0.25, atol=0.01)
    counts = np.array([int(r["counts_antibunch"]) for r in rows])
    assert counts[delays == 0][0] < counts[0]


def test_tomography_csv_columns(tmp_path):
    out = tmp_path / "tomo.csv"
    doc = {"experiment": "tomography", "params": {"states": ["t0", "plus", [1, [0, 1]]]}, "output": {"format": "csv"}}
    assert main(["tomography", "--config", write_config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    meta, rows = read_csv(out)
    assert list(rows[0]) == ["state_id", "fidelity", "purity_true", "purity_reconstructed", "converged", "iterations"]
    assert [r["state_id"] for r in rows] == ["t0", "plus", "state_2"]
    assert all(float(r["fidelity"]) > 0.98 for r in rows)
    assert any(m.startswith("# warning: params.states[2]") for m in meta)


def test_qwalk_and_entangle_json(tmp_path):
    out = tmp_path / "qw.json"
    doc = {"experiment": "qwalk-synth", "params": {"target": [1, 1, 1], "restarts": 4}}
    assert main(["qwalk-synth", "--config", write_config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())["results"]
    assert res["fidelity"] > 0.999
    assert len(res["table"]["rows"]) == 4
    assert len(res["projection"]) == 2 and len(res["projection"][0]) == 2
    out = tmp_path / "ent.json"
    assert main(["entangle", "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())["results"]
    rows = {(a, b): p for a, b, p in res["table"]["rows"]}
    assert rows[("t0", "t0")] == pytest.approx(0.125, abs=1e-12)
    assert len(rows) == 36


@pytest.mark.parametrize("experiment", ["tomography", "chsh", "hom-scan", "qwalk-synth", "entangle"])
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_runs_are_byte_identical(tmp_path, experiment, fmt):
    params = {
        "tomography": {"states": ["plus", "t1"]},
        "chsh": {"shots_per_setting": 10000},
        "hom-scan": {"target": "plus"},
        "qwalk-synth": {"target": [1, 2, 3], "restarts": 2},
        "entangle": {"pump": [1, 1, 1], "alice_refs": ["t0", "t1"], "bob_refs": [[1, 1, 1]]},
    }[experiment]
    out = tmp_path / f"out.{fmt}"
    doc = {"experiment": experiment, "seed": 99, "params": params, "output": {"path": str(out), "format": fmt}}
    cfg = write_config(tmp_path, doc)
    assert main([experiment, "--config", cfg]) == EXIT_OK
    first = out.read_bytes()
    out.unlink()
    assert main([experiment, "--config", cfg]) == EXIT_OK
    assert out.read_bytes() == first


def test_seed_override_changes_counts(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cfg = write_config(tmp_path, {"experiment": "chsh", "params": {"shots_per_setting": 1000}})
    assert main(["chsh", "--config", cfg, "--seed", "1", "--out", str(a)]) == EXIT_OK
    assert main(["chsh", "--config", cfg, "--seed", "2", "--out", str(b)]) == EXIT_OK
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert (da["seed"], db["seed"]) == (1, 2)
    assert da["results"]["s_value"] != db["results"]["s_value"]


def test_output_to_stdout(capsys):
    assert main(["entangle"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["experiment"] == "entangle"


def test_error_exit_codes(tmp_path, capsys):
    assert main(["chsh", "--out", str(tmp_path / "missing" / "x.json")]) == EXIT_IO
    assert "cannot write" in capsys.readouterr().err
    assert main(["chsh", "--config", str(tmp_path / "nope.json")]) == EXIT_IO
    bad = write_config(tmp_path, {"experiment": "chsh", "noise": {"visibility": 2}})
    assert main(["chsh", "--config", bad]) == EXIT_CONFIG
    assert "noise.visibility" in capsys.readouterr().err
    assert main(["chsh", "--seed", "-4"]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["teleport"])


def test_domain_errors_give_nonzero_status(capsys):
    # a single-bin pump with a single-bin reference makes both stations bunch; still valid
    cfg = parse_config('{"experiment": "entangle", "params": {"pump": [1, 0], "alice_refs": ["t0"], "bob_refs": ["t0"]}}')
    assert run(cfg) == EXIT_OK
    cfg = parse_config('{"experiment": "qwalk-synth", "params": {"target": [1, 0]}}')
    cfg.params["n_steps"] = 0
    assert run(cfg) != EXIT_OK
    assert "error" in capsys.readouterr().err


def test_parse_pure_state_bin_names():
    cfg = parse_config('{"experiment": "entangle", "params": {"pump": [1, 1, 1], "alice_refs": ["t2"], "bob_refs": ["t0"]}}')
    (_, ref), = cfg.params["alice_refs"]
    assert isinstance(ref, PureState)
    np.testing.assert_allclose(ref.amplitudes, [0, 0, 1])
