# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # How robust is the calibration?
#
# The operator parameters were tuned so that the default seed reproduces the
# reported trends. This notebook reruns the 5+5 experiment for master seeds
# 0-9 and checks each trend criterion separately. It shows how often a fresh
# seed would also pass. About ten seconds per seed on one core.

# %%
import numpy as np

from rcmsim.sim import ExperimentConfig, run_experiment
from rcmsim.stats import paired_t_test


def trends(ds):
    err = {c: ds.values("error", c) for c in ("manual", "robotic")}
    ang = ds.values("insertion_angle", "manual")
    ratio = ds.values("time", "robotic").sum() / ds.values("time", "manual").sum()
    band = err["manual"][ang >= 25].mean() / err["manual"][ang < 10].mean()
    ops = sorted({r.operator_id for r in ds.records})
    per_op = {c: [np.mean([r.error for r in ds.records if r.operator_id == o and r.condition == c])
                  for o in ops] for c in ("manual", "robotic")}
    p = paired_t_test(per_op["manual"], per_op["robotic"]).p_value
    m, r = err["manual"].mean(), err["robotic"].mean()
    checks = [abs(m - 3.8) <= 1.0, abs(r - 1.9) <= 0.6, 0.55 <= ratio <= 0.80, band >= 2, p < 0.05]
    return (m, r, ratio, band, p), checks


rows = []
for seed in range(10):
    vals, ok = trends(run_experiment(ExperimentConfig(seed=seed)))
    rows.append(ok)
    print(f"seed {seed}: manual {vals[0]:.2f}  robotic {vals[1]:.2f}  time ratio {vals[2]:.3f}  "
          f"band ratio {vals[3]:.2f}  p {vals[4]:.1e}  {'pass' if all(ok) else 'FAIL'}")
rows = np.array(rows)
print("per-criterion passes:", rows.sum(axis=0), " all:", rows.all(axis=1).sum(), "/ 10")
