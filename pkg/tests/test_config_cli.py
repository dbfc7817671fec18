import csv
import json
import subprocess
import sys
import time

import pytest
from hypothesis import given, strategies as st

import rcmsim.kinematics
from rcmsim.cli import main, read_pose_csv
from rcmsim.config import ConfigError, RunConfig, file_sha256, schema

SMALL = """seed: 4
operators:
  expert: {count: 1}
  novice: {count: 1}
"""


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    cfg = root / "small.config"
    cfg.write_text(SMALL)
    assert main(["simulate", str(cfg), "--out", str(root / "a")]) == 0
    return cfg, root / "a"


# ---------------------------------------------------------------- config

def test_default_config_resolves_and_round_trips():
    cfg = RunConfig.default()
    assert cfg.seed == 0
    assert cfg.document["operators"]["expert"]["count"] == 5
    back = RunConfig.from_text(cfg.to_yaml())
    assert back.document == cfg.document
    assert back.config_hash() == cfg.config_hash()
    assert RunConfig.from_dict(cfg.to_dict()).document == cfg.document


def test_partial_config_is_filled_from_defaults():
    cfg = RunConfig.from_text(SMALL)
    assert cfg.document["conditions"]["manual"]["d_out"] == 250.0
    assert cfg.document["operators"]["novice"]["tremor_rms"] == 1.5


@given(st.integers(0, 2**31), st.integers(1, 9), st.floats(0.0, 5.0), st.floats(0.1, 20.0))
def test_config_round_trip_property(seed, count, tremor, d_out_extra):
    doc = {"seed": seed, "operators": {"novice": {"count": count, "tremor_rms": tremor + 0.8}},
           "conditions": {"manual": {"d_in": 100.0, "d_out": 100.0 + d_out_extra}}}
    cfg = RunConfig.from_dict(doc)
    assert RunConfig.from_text(cfg.to_yaml()).document == cfg.document


def test_schema_is_draft_2020_12():
    assert "2020-12" in schema()["$schema"]


@pytest.mark.parametrize("text,field", [
    ("seed: 0\noperators: {expert: {tremor_rms: -1}}\n", "operators.expert.tremor_rms"),
    ("seed: 0\nboard: {colour: red}\n", "board.colour"),
    ("seed: 0\nwarp: 9\n", "warp"),
    ("operators: {expert: {count: 2}}\n", "seed"),
    ("seed: 0\nconditions: {robotic: {ik: {max_iters: 2.5}}}\n", "conditions.robotic.ik.max_iters"),
    ("seed: 0\noperators: {expert: {tremor_rms: 3.0}}\n", "tremor_rms"),
    ("seed: 0\nboard: {depth_range: [150, 80]}\n", "depth_range"),
])
def test_invalid_config_names_field(text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        RunConfig.from_text(text)


def test_config_yaml_errors():
    with pytest.raises(ConfigError, match="YAML"):
        RunConfig.from_text("seed: [1,\n")
    with pytest.raises(ConfigError):
        RunConfig.from_text("- 1\n- 2\n")


def test_simulate_rejects_bad_config(tmp_path, capsys):
    p = tmp_path / "bad.config"
    p.write_text("seed: 0\noperators: {expert: {tremor_rms: -1}}\n")
    assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "operators.expert.tremor_rms" in capsys.readouterr().err
    assert main(["simulate", str(tmp_path / "missing.config")]) == 2


# ---------------------------------------------------------------- simulate

def test_simulate_writes_manifest(small_run):
    cfg, out = small_run
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_hash"] == RunConfig.load(cfg).config_hash()
    assert man["seed"] == 4
    assert {"rcmsim", "python", "numpy"} <= set(man["versions"])
    for name, digest in man["outputs"].items():
        assert file_sha256(out / name) == digest
    with open(out / "trials.csv") as fh:
        assert sum(1 for _ in csv.reader(fh)) == 41


def test_manifest_alone_reproduces_outputs(small_run, tmp_path):
    _, out = small_run
    assert main(["simulate", str(out / "manifest.json"), "--out", str(tmp_path)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    for name, digest in man["outputs"].items():
        assert file_sha256(tmp_path / name) == digest


def test_simulate_threads_and_trace_do_not_change_trials(small_run, tmp_path):
    cfg, out = small_run
    assert main(["simulate", str(cfg), "--out", str(tmp_path), "--threads", "2", "--trace"]) == 0
    assert (tmp_path / "trials.csv").read_bytes() == (out / "trials.csv").read_bytes()
    traces = sorted(p.name for p in tmp_path.glob("trace_*.csv"))
    assert len(traces) == 4


def test_default_config_gives_200_records(default_run):
    out = default_run.out
    with open(out / "trials.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 200
    assert {r["operator_id"] for r in rows} == {f"{t}{i:02d}" for t in "EN" for i in range(1, 6)}


def test_default_report_has_all_tests(default_run):
    out = default_run.out
    doc = json.loads((out / "report.json").read_text())
    for name, t in doc["tests"].items():
        assert "skipped" not in t, name
        assert 0 <= t["p_value"] <= 1
    rows = {r["condition"]: r for r in doc["summary_table"]}
    assert rows["robotic"]["error"]["mean"] < rows["manual"]["error"]["mean"]
    assert doc["tests"]["anova_interaction"]["p_value"] < 0.05


# ---------------------------------------------------------------- analyze

def _write_rows(path, rows, header=None):
    header = header or ["operator_id", "tier", "condition", "target_index", "insertion_angle",
                        "error", "time", "order_position", "seed"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def test_analyze_two_records_skips_tests(tmp_path, capsys):
    p = tmp_path / "trials.csv"
    _write_rows(p, [["E01", "expert", "manual", 0, 12.0, 3.1, 5.0, 0, 1],
                    ["E01", "expert", "robotic", 0, 12.0, 1.7, 3.5, 0, 2]])
    assert main(["analyze", str(p)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["descriptives"]["manual"]["error"]["mean"] == 3.1
    assert all("skipped" in t for t in doc["tests"].values())
    assert "skipped" in capsys.readouterr().out


def test_analyze_missing_column(tmp_path, capsys):
    p = tmp_path / "trials.csv"
    _write_rows(p, [["E01", "expert", "manual", 0, 12.0, 5.0, 0, 1]],
                header=["operator_id", "tier", "condition", "target_index", "insertion_angle",
                        "time", "order_position", "seed"])
    assert main(["analyze", str(p)]) == 2
    assert "error" in capsys.readouterr().err


def test_analyze_bad_row_reports_line(tmp_path, capsys):
    p = tmp_path / "trials.csv"
    _write_rows(p, [["E01", "expert", "manual", 0, 12.0, 3.1, 5.0, 0, 1],
                    ["E01", "expert", "manual", 1, 12.0, "abc", 5.0, 1, 1]])
    assert main(["analyze", str(p)]) == 2
    assert ":3:" in capsys.readouterr().err
    assert main(["analyze", str(tmp_path / "nope.csv")]) == 2


# ---------------------------------------------------------------- calibrate-pivot

def _pivot_out(capsys):
    out = capsys.readouterr().out
    return {line.split()[0]: [float(v) for v in line.split()[1:]] for line in out.splitlines()
            if line and not line.startswith("wrote")}


def test_pivot_synthesize_noiseless(capsys):
    assert main(["calibrate-pivot", "--synthesize", "7", "0.0"]) == 0
    res = _pivot_out(capsys)
    assert res["rms_residual_mm"][0] < 1e-9
    assert res["pivot_error_mm"][0] < 1e-9


def test_pivot_synthesize_noisy(capsys):
    assert main(["calibrate-pivot", "--synthesize", "7", "0.1"]) == 0
    assert 0.05 <= _pivot_out(capsys)["rms_residual_mm"][0] <= 0.15


def test_pivot_csv_round_trip(tmp_path, capsys):
    p = tmp_path / "poses.csv"
    assert main(["calibrate-pivot", str(p), "--synthesize", "3", "0.0"]) == 0
    first = _pivot_out(capsys)
    assert len(read_pose_csv(p)) == 20
    assert main(["calibrate-pivot", str(p)]) == 0
    second = _pivot_out(capsys)
    assert second["pivot_mm"] == pytest.approx(first["pivot_mm"], abs=1e-6)


def test_pivot_degenerate_exit(tmp_path, capsys):
    p = tmp_path / "poses.csv"
    p.write_text("qw,qx,qy,qz,px,py,pz\n" + "".join(
        f"1,0,0,0,{i},{2 * i},0\n" for i in range(6)))
    assert main(["calibrate-pivot", str(p)]) == 3
    assert "degenerate" in capsys.readouterr().err


def test_pivot_input_errors(tmp_path):
    p = tmp_path / "poses.csv"
    p.write_text("qw,qx,qy,px,py,pz\n1,0,0,0,0,0\n")
    assert main(["calibrate-pivot", str(p)]) == 2
    assert main(["calibrate-pivot"]) == 2
    assert main(["calibrate-pivot", "--synthesize", "x", "0.1"]) == 2
    assert main(["calibrate-pivot", "--synthesize", "1", "-0.1"]) == 2


# ---------------------------------------------------------------- check

def test_check_fast_passes_quickly(capsys):
    t0 = time.perf_counter()
    assert main(["check", "--fast"]) == 0
    assert time.perf_counter() - t0 < 10.0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_check_catches_jacobian_sign_bug(monkeypatch, capsys):
    real = rcmsim.kinematics.geometric_jacobian

    def flipped(*args, **kwargs):
        J = real(*args, **kwargs).copy()
        J[:3, 2] *= -1.0
        return J

    monkeypatch.setattr(rcmsim.kinematics, "geometric_jacobian", flipped)
    assert main(["check", "--fast"]) == 1
    out = capsys.readouterr().out
    assert any(line.startswith("FAIL") and "jacobian" in line for line in out.splitlines())


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rcmsim", "--help"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 0
    for cmd in ("simulate", "analyze", "calibrate-pivot", "check"):
        assert cmd in res.stdout
