# %% [markdown]
# # Lag-augmented local projections in an AR(1)
#
# A local projection regresses `y_{t+h}` on `y_t`. Adding one extra lag
# `y_{t-1}` as a control makes the coefficient on `y_t` equal to the
# coefficient on the innovation `u_t`, which is stationary even when the
# process has a unit root. Standard errors then only need to be
# heteroskedasticity robust.

# %%
import numpy as np

from lpinfer.asymptotics import asyvar, indifference_lp_vs_arla, indifference_lp_vs_lpna
from lpinfer.bootstrap import BootstrapSpec, lp_percentile_t_path
from lpinfer.lp import LpSpec, lp_estimate
from lpinfer.var import VarCoefficients, simulate

# %% [markdown]
# ## One sample from a random walk

# %%
sample = simulate(VarCoefficients([1.0]), None, 240, rng=11)
y, u = sample.data[:, 0], sample.innovations[:, 0]

for h in (1, 6, 12):
    la, _ = lp_estimate(sample, LpSpec(h))
    na, _ = lp_estimate(sample, LpSpec(h, lag_augmented=False))
    print(f"h={h:2d}  LP-LA {la.point:6.3f} [{la.lo:6.3f}, {la.hi:6.3f}]   LP {na.point:6.3f} [{na.lo:6.3f}, {na.hi:6.3f}]")

# %% [markdown]
# The coefficient on `y_t` with `y_{t-1}` controlled for is the same number
# as the coefficient on the true innovation.

# %%
h = 6
N = 240 - h - 1
X = np.column_stack([np.ones(N), y[1 : 1 + N], y[:N]])
Z = np.column_stack([np.ones(N), u[1 : 1 + N], y[:N]])
target = y[1 + h : 1 + h + N]
print(np.linalg.lstsq(X, target, rcond=None)[0][1], np.linalg.lstsq(Z, target, rcond=None)[0][1])

# %% [markdown]
# ## Wild recursive bootstrap
#
# Percentile-t intervals for several horizons from one set of bootstrap paths.

# %%
reps = lp_percentile_t_path(sample, LpSpec(1), [1, 6, 12, 24], BootstrapSpec(500), 0.90, rng=3)
for r in reps:
    print(f"{r.method}  point {r.point:6.3f}  interval [{r.lo:6.3f}, {r.hi:6.3f}]")

# %% [markdown]
# ## Coverage at a unit root
#
# A short Monte Carlo of the delta-method interval at `h = 12`.

# %%
hits = {True: 0, False: 0}
R = 300
for r in range(R):
    s = simulate(VarCoefficients([1.0]), None, 240, rng=1000 + r)
    for la in (True, False):
        hits[la] += lp_estimate(s, LpSpec(12, lag_augmented=la))[0].covers(1.0)
print({("LP-LA" if k else "LP"): v / R for k, v in hits.items()})

# %% [markdown]
# ## Asymptotic efficiency in the stationary case
#
# `T` times the variance of each estimator of `rho^h`, and the `|rho|`
# thresholds at which augmented LP stops losing to augmented AR (lower) and
# to non-augmented LP (upper).

# %%
for rho in (0.5, 0.9):
    for h in (1, 4, 8):
        v = asyvar(rho, h)
        print(f"rho={rho} h={h}  LP-LA {v.lp_la:7.3f}  LP {v.lp_na:7.3f}  AR-LA {v.ar_la:7.3f}")

# %%
for h in (2, 3, 6, 12, 24, 48):
    print(h, round(indifference_lp_vs_arla(h), 4), round(indifference_lp_vs_lpna(h), 4))
