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
# # Pivot calibration
#
# Recover the tool-tip offset and the pivot point from flange poses recorded
# while the tool pivots about a fixed point.

# %%
import numpy as np

from rcmsim.rcm import pivot_calibrate, synthesize_pivot_poses

t_true = np.array([0.0, 0.0, 310.0])
p_true = np.array([100.0, 50.0, 200.0])
res = pivot_calibrate(synthesize_pivot_poses(t_true, p_true, 20, rng=1))
print("noiseless tip offset", res.tip_offset, "pivot", res.pivot, "rms", res.rms_residual)

# %% [markdown]
# Pivot error distribution with 0.1 mm per-axis position noise.

# %%
errs = np.array([np.linalg.norm(pivot_calibrate(synthesize_pivot_poses(
    t_true, p_true, 20, rng=s, noise_mm=0.1 * np.sqrt(3))).pivot - p_true) for s in range(200)])
print(f"median {np.median(errs):.3f} mm, 95th percentile {np.percentile(errs, 95):.3f} mm")
