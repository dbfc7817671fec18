"""Command-line entry point: simulate, analyze, calibrate-pivot, check."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_manifest
from .kinematics import Pose

POSE_COLUMNS = ("qw", "qx", "qy", "qz", "px", "py", "pz")
PIVOT_TRUTH = (np.array([0.0, 0.0, 310.0]), np.array([100.0, 50.0, 200.0]))


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------- simulate

def write_summaries(path, summaries) -> None:
    Path(path).write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n")


def write_traces(out_dir, traces) -> list:
    from .sim.trial import TRACE_COLUMNS
    paths = []
    for (op_id, cond), rows in traces.items():
        p = Path(out_dir) / f"trace_{op_id}_{cond}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
        paths.append(p)
    return paths


def simulate(cfg: RunConfig, out_dir, trace: bool | None = None, threads: int | None = None):
    """Run the experiment described by ``cfg``; returns the written paths."""
    from .sim.experiment import run_experiment, write_trials_csv
    trace = cfg.trace if trace is None else trace
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = run_experiment(cfg.experiment(threads=threads), trace=trace)
    trials = out / "trials.csv"
    write_trials_csv(trials, ds.records)
    summaries = out / "summaries.json"
    write_summaries(summaries, ds.summaries)
    outputs = [trials, summaries]
    if trace:
        outputs += write_traces(out, ds.traces)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps(build_manifest(cfg, outputs), indent=2, sort_keys=True) + "\n")
    return outputs + [manifest]


def cmd_simulate(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
    except FileNotFoundError:
        return _err(f"config file not found: {args.config}")
    except ConfigError as exc:
        return _err(str(exc))
    out = args.out or cfg.output_dir
    t0 = time.perf_counter()
    paths = simulate(cfg, out, trace=True if args.trace else None, threads=args.threads)
    n = sum(1 for _ in open(paths[0])) - 1
    print(f"wrote {n} trial records to {paths[0]} ({time.perf_counter() - t0:.1f} s)")
    print(f"config hash {cfg.config_hash()}")
    return 0


# ---------------------------------------------------------------- analyze

def cmd_analyze(args) -> int:
    from .report import build_report
    from .sim.experiment import read_trials_csv
    try:
        records = read_trials_csv(args.trials)
    except FileNotFoundError:
        return _err(f"trials file not found: {args.trials}")
    except ValueError as exc:
        return _err(str(exc))
    summaries = None
    spath = Path(args.summaries) if args.summaries else Path(args.trials).with_name("summaries.json")
    if spath.exists():
        summaries = json.loads(spath.read_text())
    elif args.summaries:
        return _err(f"summaries file not found: {args.summaries}")
    out = args.out or str(Path(args.trials).parent)
    report = build_report(records, summaries)
    paths = report.write(out)
    tests = report.document["tests"]
    skipped = sorted(k for k, v in tests.items() if "skipped" in v)
    print(f"wrote {len(paths)} files to {out}; {len(tests) - len(skipped)} tests run, "
          f"{len(skipped)} skipped")
    for k in skipped:
        print(f"  skipped {k}: {tests[k]['skipped']}")
    return 0


# ---------------------------------------------------------------- calibrate-pivot

def read_pose_csv(path) -> list:
    poses = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in POSE_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                v = np.array([float(row[c]) for c in POSE_COLUMNS])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
            q = v[:4]
            nq = np.linalg.norm(q)
            if not np.all(np.isfinite(v)) or nq == 0:
                raise ValueError(f"{path}:{lineno}: invalid pose")
            poses.append(Pose(v[4:], q / nq))
    return poses


def write_pose_csv(path, poses) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POSE_COLUMNS)
        for p in poses:
            w.writerow([repr(float(x)) for x in (*p.orientation, *p.position)])


def cmd_calibrate_pivot(args) -> int:
    from .rcm import DegenerateInputError, pivot_calibrate, synthesize_pivot_poses
    if args.synthesize is not None:
        seed, noise = args.synthesize
        try:
            seed, noise = int(seed), float(noise)
        except ValueError:
            return _err("--synthesize takes an integer seed and a noise level in mm")
        if noise < 0:
            return _err("noise level must be >= 0")
        poses = synthesize_pivot_poses(*PIVOT_TRUTH, n=20, rng=seed, noise_mm=noise)
        if args.poses:
            write_pose_csv(args.poses, poses)
            print(f"wrote {len(poses)} synthetic poses to {args.poses}")
    elif args.poses:
        try:
            poses = read_pose_csv(args.poses)
        except FileNotFoundError:
            return _err(f"pose file not found: {args.poses}")
        except ValueError as exc:
            return _err(str(exc))
    else:
        return _err("give a poses CSV or --synthesize SEED NOISE")
    try:
        res = pivot_calibrate(poses)
    except DegenerateInputError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return 3
    fmt = lambda v: " ".join(f"{x:.6f}" for x in v)  # noqa: E731
    print(f"tip_offset_mm {fmt(res.tip_offset)}")
    print(f"pivot_mm {fmt(res.pivot)}")
    print(f"rms_residual_mm {res.rms_residual:.6g}")
    if args.synthesize is not None:
        t, p = PIVOT_TRUTH
        print(f"pivot_error_mm {np.linalg.norm(res.pivot - p):.6g}")
        print(f"tip_offset_error_mm {np.linalg.norm(res.tip_offset - t):.6g}")
    return 0


# ---------------------------------------------------------------- check

def cmd_check(args) -> int:
    from .checks import run_checks
    t0 = time.perf_counter()
    results = run_checks(fast=args.fast)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<16} {r.detail} [{r.seconds:.2f} s]")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed in {time.perf_counter() - t0:.1f} s")
    return 1 if n_fail else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcmsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the targeting experiment from a config")
    s.add_argument("config", help="YAML run config or a manifest.json from an earlier run")
    s.add_argument("--out", help="output directory (default: the config's output_dir)")
    s.add_argument("--trace", action="store_true", help="also write per-tick trace CSVs")
    s.add_argument("--threads", type=int, help="worker processes (default: RCMSIM_THREADS or 1)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="statistics and figure data from trials.csv")
    a.add_argument("trials")
    a.add_argument("--summaries", help="summaries.json (default: next to trials.csv, if present)")
    a.add_argument("--out", help="output directory (default: next to trials.csv)")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("calibrate-pivot", help="least-squares pivot calibration")
    c.add_argument("poses", nargs="?", help="CSV with columns qw,qx,qy,qz,px,py,pz")
    c.add_argument("--synthesize", nargs=2, metavar=("SEED", "NOISE_MM"),
                   help="generate 20 demo poses (written to POSES if given)")
    c.set_defaults(func=cmd_calibrate_pivot)

    k = sub.add_parser("check", help="run the invariant battery")
    k.add_argument("--fast", action="store_true", help="small sweeps (a few seconds)")
    k.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
