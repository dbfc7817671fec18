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
# # Arm kinematics and the virtual RCM
#
# Forward kinematics of the ten-joint chain, the analytic Jacobian against
# central differences, and an RCM-constrained IK solve from the ready pose to
# a target below the trocar.

# %%
import numpy as np

from rcmsim.kinematics import (default_chain, finite_difference_jacobian, forward_kinematics,
                               geometric_jacobian, random_configuration)
from rcmsim.rcm import RcmConstraint, rcm_error, solve_ik
from rcmsim.kinematics import Pose
from rcmsim.sim.trial import TIP_DOWN, ready_state
from rcmsim.transforms import quat_from_matrix

chain = default_chain()
print("home tip", forward_kinematics(chain, np.zeros(10)).instrument.tip)

# %% [markdown]
# Analytic vs central-difference Jacobian on random configurations.

# %%
rng = np.random.default_rng(0)
errs = []
for q in random_configuration(chain, rng, 200):
    Jg = geometric_jacobian(chain, q, chain.tip_frame, chain.tool)
    Jf = finite_difference_jacobian(chain, q, chain.tip_frame, chain.tool)
    errs.append(np.max(np.abs(Jg - Jf)) / np.max(np.abs(Jg)))
print(f"max relative error {max(errs):.2e}")

# %% [markdown]
# Ready pose: the shaft passes through the fulcrum with the tip 60 mm below it.

# %%
fulcrum = np.array([400.0, 0.0, 100.0])
con = RcmConstraint(fulcrum)
ready = ready_state(chain, fulcrum)
print("ready tip", forward_kinematics(chain, ready.q).instrument.tip.round(4))
print("lambda", round(ready.lam, 4), "RCM error", np.linalg.norm(rcm_error(chain, ready, con)))

# %% [markdown]
# Move the tip 30 mm sideways and 50 mm deeper while the shaft keeps pivoting
# about the fulcrum.

# %%
target = Pose(fulcrum + [30.0, -20.0, -110.0], quat_from_matrix(TIP_DOWN))
res = solve_ik(chain, ready, target, con)
tip = forward_kinematics(chain, res.state.q).instrument.tip
print("converged", res.converged, "in", res.iterations, "iterations")
print("tip", tip.round(4), "position residual", f"{res.residual_pos:.1e}")
print("RCM residual", f"{res.residual_rcm:.1e}", "lambda", round(res.state.lam, 4))
