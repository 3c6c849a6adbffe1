# %% [markdown]
# # A resonant quench in the two-site Z3 gauge model
#
# We quench the Dirac vacuum at m/J = -1.49 and g/J = 1.7. At this coupling
# the vacuum and the meson have equal diagonal energies, so the system Rabi
# oscillates between them and the Loschmidt echo drops to zero once per period.

# %%
import numpy as np

from dqpt.quench import QuenchSpec, critical_times, loschmidt_series, oscillation_period, resonance_coupling

m, g = -1.49, 1.7
print(f"resonant coupling for m/J = {m}: g/J = {resonance_coupling(1, m):.3f}")

spec = QuenchSpec.for_couplings(m, g, np.linspace(0, 40, 4001))
series = loschmidt_series(spec)

# %% [markdown]
# Zeros of the echo are peaks of the rate function. Times are in the rescaled
# unit t * sqrt(m^2 + J^2).

# %%
zeros = critical_times(spec.hamiltonian, spec.initial_state, spec.time_grid, spec.time_scale)
print("critical times:", np.round(zeros, 3))
print(f"echo period: {oscillation_period(series.times, series.echo):.3f}")
print(f"largest rate value: {series.rate.max():.2f}")

# %% [markdown]
# Sampling the rate function every two time units shows the sharp peaks.

# %%
for t, lam in zip(series.times[::200], series.rate[::200]):
    print(f"t = {t:5.1f}  rate = {lam:6.3f}  " + "#" * int(10 * lam))
