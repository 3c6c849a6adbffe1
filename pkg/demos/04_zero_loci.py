# %% [markdown]
# # Where do the echo zeros appear?
#
# Scanning (m/J, g/J) for quenches whose echo reaches zero traces out loci.
# The sub-critical branch follows g ~ sqrt(-m), the resonance condition
# between the vacuum and the meson.

# %%
import numpy as np

from dqpt.cli import load_scenario, run_scenario
from dqpt.quench import RESONANCE_A

res = run_scenario(load_scenario("loci"), "scan")
cols, rows = res.tables["loci"]
print(f"{res.summary['n_points']} grid points with at least one zero")
fit = res.summary["regression"]
print(f"ln g = {fit['intercept']:.3f} + {fit['slope']:.3f} ln(-m)")
print(f"resonance prediction: ln g = {np.log(RESONANCE_A):.3f} + 0.5 ln(-m)")

# %%
for m, g, k, t in rows[:10]:
    print(f"m/J = {m:6.3f}  g/J = {g:5.3f}  zero #{k} at t = {t:.2f}")
