import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from capmax import Grid, make_field
from capmax.cli import main
from capmax.sampling import write_field_csv


def run(tmp_path, command, cfg, *flags):
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps({"schema": 1, **cfg}))
    return main([command, "--config", str(path), *flags])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_maximal_delta_power_law(tmp_path):
    out = tmp_path / "out"
    code = run(tmp_path, "maximal", {
        "profile": {"kind": "power_law", "kappa": 1, "d": 1},
        "input": {"type": "delta", "n": 1},
        "grid": {"n": 1, "half_width": 2.0, "h": 0.5},
    }, "--out", str(out))
    assert code == 0
    rows = read_rows(out / "maximal.csv")
    assert len(rows) == 8
    for r in rows:
        assert float(r["value"]) == pytest.approx(1 / abs(float(r["x"])), rel=1e-15)


def test_maximal_missing_grid_is_config_error(tmp_path):
    code = run(tmp_path, "maximal", {"profile": {"kind": "lebesgue", "n": 1},
                                     "input": {"type": "delta", "n": 1}},
               "--out", str(tmp_path / "o"))
    assert code == 2


def test_unreadable_field_csv_is_config_error(tmp_path):
    code = run(tmp_path, "maximal", {
        "profile": {"kind": "lebesgue", "n": 1},
        "input": {"type": "field_csv", "path": "does_not_exist.csv"},
        "grid": {"n": 1, "half_width": 2.0, "h": 0.5},
    }, "--out", str(tmp_path / "o"))
    assert code == 2


def test_bad_json_and_schema(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["curve", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"schema": 99}))
    assert main(["curve", "--config", str(bad)]) == 2


def test_maximal_deterministic_bytes(tmp_path):
    cfg = {"profile": {"kind": "wobble", "kappa": 1, "d": 2, "epsilon": 0.2},
           "input": {"type": "gaussian_atoms", "count": 30, "n": 2, "seed": 3},
           "grid": {"n": 2, "half_width": 3.0, "h": 0.25}}
    assert run(tmp_path, "maximal", cfg, "--out", str(tmp_path / "a"), "--threads", "1") == 0
    assert run(tmp_path, "maximal", cfg, "--out", str(tmp_path / "b"), "--threads", "4") == 0
    assert (tmp_path / "a" / "maximal.csv").read_bytes() == (tmp_path / "b" / "maximal.csv").read_bytes()


def test_maximal_from_field_csv(tmp_path):
    f = make_field("indicator_ball", Grid.centered(1, 1.5, 0.01), R=1.0)
    write_field_csv(f, tmp_path / "field.csv")
    out = tmp_path / "out"
    code = run(tmp_path, "maximal", {
        "profile": {"kind": "lebesgue", "n": 1},
        "input": {"type": "field_csv", "path": "field.csv"},
        "grid": {"n": 1, "half_width": 1.5, "h": 0.01},
        "eval_points": [[0.0], [10.0]],
    }, "--out", str(out))
    assert code == 0
    vals = [float(r["value"]) for r in read_rows(out / "maximal.csv")]
    assert vals[0] == pytest.approx(1.0, rel=1e-9)
    assert vals[1] == pytest.approx(1 / 11, rel=0.02)


def test_curve_indicator(tmp_path):
    out = tmp_path / "out"
    code = run(tmp_path, "curve", {
        "profile": {"kind": "lebesgue", "n": 1},
        "input": {"type": "preset", "preset": "indicator_ball", "R": 1.0,
                  "grid": {"n": 1, "half_width": 1.5, "h": 0.01}},
        "lambdas": {"start": 0.1, "stop": 1e-4, "per_decade": 2},
    }, "--out", str(out))
    assert code == 0
    limit = json.loads((out / "limit.json").read_text())
    assert limit["limit"]["value"] == pytest.approx(2.0, rel=0.05)
    rows = read_rows(out / "curve.csv")
    assert len(rows) == 7
    bounds = json.loads((out / "bounds.json").read_text())
    assert len(bounds) == 7 and all(b["lower"] <= b["upper"] for b in bounds)


@pytest.mark.parametrize("profile", [{"kind": "lebesgue", "n": 2},
                                     {"kind": "power_law", "kappa": 1, "d": 1.5},
                                     {"kind": "wobble", "kappa": 1, "d": 2, "epsilon": 0.2}])
def test_curve_delta_constant(tmp_path, profile):
    out = tmp_path / "out"
    code = run(tmp_path, "curve", {"profile": profile, "input": {"type": "delta", "n": 2},
                                   "lambdas": [0.1, 0.01, 0.001], "directions": 16},
               "--out", str(out))
    assert code == 0
    for r in read_rows(out / "curve.csv"):
        assert float(r["h_lower"]) == pytest.approx(1.0, rel=1e-4)
        assert float(r["h_upper"]) == pytest.approx(1.0, rel=1e-4)


def test_curve_single_threshold_is_config_error(tmp_path):
    code = run(tmp_path, "curve", {"profile": {"kind": "lebesgue", "n": 1},
                                   "input": {"type": "delta", "n": 1}, "lambdas": [0.1]},
               "--out", str(tmp_path / "o"))
    assert code == 2


def test_curve_increasing_schedule_is_config_error(tmp_path):
    code = run(tmp_path, "curve", {"profile": {"kind": "lebesgue", "n": 1},
                                   "input": {"type": "delta", "n": 1},
                                   "lambdas": [0.001, 0.01, 0.1]},
               "--out", str(tmp_path / "o"))
    assert code == 2


def test_verify_corrupted_profile_exit_1(tmp_path, capsys):
    code = run(tmp_path, "verify", {
        "profile": {"kind": "wobble", "kappa": 1, "d": 1, "epsilon": 0.6},
        "inputs": [{"type": "delta", "n": 2}],
    }, "--out", str(tmp_path / "o"))
    assert code == 1
    assert "validate_profile" in capsys.readouterr().err
    report = json.loads((tmp_path / "o" / "verify.json").read_text())
    assert any(name.startswith("validate_profile") for name in report["failed"])


def test_verify_empty_measure_exit_2(tmp_path):
    code = run(tmp_path, "verify", {"inputs": [{"type": "atoms", "atoms": []}]},
               "--out", str(tmp_path / "o"))
    assert code == 2


def test_verify_atomic_suite_exit_0(tmp_path):
    code = run(tmp_path, "verify", {
        "profiles": [{"kind": "lebesgue", "n": 2}, {"kind": "wobble", "kappa": 1, "d": 2, "epsilon": 0.2}],
        "inputs": [{"type": "delta", "n": 2}, {"type": "two_atom", "n": 2}],
    }, "--out", str(tmp_path / "o"))
    assert code == 0
    report = json.loads((tmp_path / "o" / "verify.json").read_text())
    names = [c["name"] for c in report["checks"]]
    for prefix in ("validate_profile", "point_mass_exactness", "scaling_convergence",
                   "superlevel_openness", "weak11_bound", "sandwich", "tau_bracket",
                   "boundedness", "ray_probes", "centered_vs_uncentered"):
        assert any(n.startswith(prefix) for n in names), prefix


@pytest.mark.slow
def test_verify_default_config_exit_0(tmp_path):
    assert main(["verify", "--out", str(tmp_path / "o")]) == 0


def test_covering_disjoint_and_nested(tmp_path):
    out = tmp_path / "a"
    balls = {"centers": [[0, 0], [5, 0], [0, 5]], "radii": [1, 1, 1]}
    assert run(tmp_path, "covering", {"balls": balls}, "--out", str(out)) == 0
    assert len(read_rows(out / "selection.csv")) == 3
    out = tmp_path / "b"
    balls = {"centers": [[0, 0], [0.1, 0], [0, 0.1]], "radii": [3, 1, 2]}
    assert run(tmp_path, "covering", {"balls": balls}, "--out", str(out)) == 0
    rows = read_rows(out / "selection.csv")
    assert len(rows) == 1 and float(rows[0]["radius"]) == 3


def test_covering_seeded_deterministic(tmp_path):
    cfg = {"random_family": {"count": 100, "n": 2}}
    assert run(tmp_path, "covering", cfg, "--out", str(tmp_path / "a"), "--seed", "5") == 0
    assert run(tmp_path, "covering", cfg, "--out", str(tmp_path / "b"), "--seed", "5") == 0
    for name in ("selection.csv", "covering.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rep = json.loads((tmp_path / "a" / "covering.json").read_text())
    assert rep["misses"] == 0 and rep["disjoint"]


def test_covering_bad_family(tmp_path):
    assert run(tmp_path, "covering", {"balls": {"centers": [[0, 0]], "radii": [-1]}},
               "--out", str(tmp_path / "o")) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "capmax", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify" in proc.stdout


def test_no_partial_files_left(tmp_path):
    out = tmp_path / "out"
    run(tmp_path, "covering", {"random_family": {"count": 20}}, "--out", str(out))
    assert sorted(p.name for p in out.iterdir()) == ["covering.json", "selection.csv"]
