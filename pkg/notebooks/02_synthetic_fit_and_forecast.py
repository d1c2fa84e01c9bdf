"""
Fit and forecast on data drawn from a known model
=================================================

Draw three correlated trajectories from a known multi-output prior, hide the
tail of the first one, fit the hyperparameters and check how often the 95%
band covers the hidden truth.
"""

# %%
import numpy as np

from cellgp import McgpHyperParams, TrainingSet, deviance, mcgp_fit
from cellgp.synthetic import sample_prior

truth = McgpHyperParams(
    amplitude=[[3.0, 1.5], [2.5, -1.0], [3.5, 2.0]],
    smoother_width=[[4.0, 2.0], [5.0, 3.0], [3.0, 2.5]],
    latent_width=[40.0, 12.0],
    noise=0.05,
)
full = np.arange(1.0, 217.0, 3.0)          # 72 cycles per cell
latent, observed = sample_prior(truth, [full, full, full], seed=3, cells=["c0", "c1", "c2"])

# %%
# The first cell keeps 50 cycles, the others keep their first 50 too.
n = 50
train = TrainingSet(["c0", "c1", "c2"], [full[:n]] * 3, [y[:n] for y in observed])
print("training points:", train.T)

# %%
model = mcgp_fit(train, R=2, restarts=5, seed=3)
r = model.fit_report
print(f"fitted deviance {r.final_deviance:.2f}  vs at the truth {deviance(truth, train):.2f}")
print(f"{r.iterations} iterations, {r.restarts_converged}/{r.restarts_used} restarts converged")

# %%
hidden = full[n:]
pred = model.predict("c0", hidden)
lo, hi = pred.interval()
inside = (latent[0][n:] >= lo) & (latent[0][n:] <= hi)
print(f"95% band covers {inside.mean():.0%} of the hidden latent values")
for c, m, s, y in list(zip(hidden, pred.mean, pred.stddev, latent[0][n:]))[::4]:
    print(f"cycle {c:5.0f}  forecast {m:+.3f} +- {1.96 * s:.3f}  truth {y:+.3f}")
