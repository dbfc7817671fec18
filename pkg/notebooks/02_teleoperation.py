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
# # Teleoperation pipeline
#
# The 50 ms boxcar tremor filter at 1 kHz, its closed-form magnitude response,
# and 5:1 motion scaling with a clutch.

# %%
import numpy as np

from rcmsim.kinematics import Pose
from rcmsim.teleop import IDENTITY_QUAT, TeleopConfig, TeleopPipeline, TremorFilter, boxcar_gain

fs, n = 1000.0, 50
for f in (1.0, 5.0, 10.0, 15.0, 20.0):
    print(f"{f:5.1f} Hz  gain {float(boxcar_gain(f, n, fs)):.6f}")

# %% [markdown]
# Measured gain of a 10 Hz sinusoid after the filter settles.

# %%
t = np.arange(4000) / fs
x = np.sin(2 * np.pi * 10.0 * t)
filt = TremorFilter(n, dim=1)
y = filt.step_block(x[:, None])[:, 0]
tail = slice(2000, None)
amp = np.hypot(2 * np.mean(y[tail] * np.cos(2 * np.pi * 10 * t[tail])),
               2 * np.mean(y[tail] * np.sin(2 * np.pi * 10 * t[tail])))
print(f"measured {amp:.10f}  closed form {float(boxcar_gain(10.0, n, fs)):.10f}")

# %% [markdown]
# A 50 mm hand move becomes a 10 mm instrument move. While clutched out the
# hand repositions and the target holds still.

# %%
pipe = TeleopPipeline(TeleopConfig(), Pose(np.zeros(3), IDENTITY_QUAT))
pipe.step_block(np.zeros((100, 3)))
move = np.linspace(0, 50, 1000)[:, None] * [1.0, 0.0, 0.0]
pipe.step_block(move)
out = pipe.step_block(np.repeat(move[-1:], 100, axis=0))
print("tip target after 50 mm move", out[-1].round(6))
held = pipe.step_block(np.zeros((200, 3)), clutch_engaged=False)
print("clutched out, target moved", np.max(np.abs(held - out[-1])))
pipe.step_block(np.zeros((10, 3)))  # re-engage with the hand at rest
again = pipe.step_block(np.repeat([[25.0, 0.0, 0.0]], 200, axis=0))
print("re-engaged, 25 mm more hand motion ->", again[-1].round(6))
