"""
Cross-covariance of convolved processes
=======================================

Each cell's capacity is a sum over latent white-ish processes, each blurred by
a cell-specific Gaussian smoother. The covariance between two cells is then a
double convolution integral, which collapses to a single Gaussian in the lag.
This script checks the collapse numerically and looks at how the widths set
the cross-correlation.
"""

# %%
import math

import numpy as np

from cellgp.kernels import McgpHyperParams, latent_kernel, mcgp_cross_cov, smoother
from cellgp.numerics import quad_double_integral

# one latent function, two cells with different smoother widths
p = McgpHyperParams(amplitude=[[1.2], [-0.8]], smoother_width=[[2.0], [5.0]],
                    latent_width=[10.0], noise=0.01)

# %%
# Brute force: integrate smoother_0(t - u) * smoother_1(t2 - v) * latent(u - v)
t, t2 = 30.0, 42.0


def integrand(u, v):
    return (smoother(1.2, 2.0, t - u) * smoother(-0.8, 5.0, t2 - v)
            * latent_kernel(10.0, u - v))


brute = quad_double_integral(integrand, center=(t, t2), half_width=80.0, n_nodes=256)
closed = mcgp_cross_cov(p, 0, t, 1, t2, same_observation=False)
print(f"quadrature  {brute:.12e}")
print(f"closed form {closed:.12e}")
print(f"rel diff    {abs(brute - closed) / abs(closed):.1e}")

# %%
# The combined variance is the sum of the three squared widths
v = 2.0**2 + 5.0**2 + 10.0**2
print("by hand    ", 1.2 * -0.8 * math.exp(-0.5 * 12.0**2 / v) / math.sqrt(2 * math.pi * v))

# %%
# Correlation between the cells as a function of lag. A negative amplitude
# product flips the sign; wider smoothers flatten the curve.
lags = np.arange(-40, 41, 10)
k00 = mcgp_cross_cov(p, 0, 0.0, 0, 0.0, False)
k11 = mcgp_cross_cov(p, 1, 0.0, 1, 0.0, False)
for lag in lags:
    c = mcgp_cross_cov(p, 0, 0.0, 1, float(lag), False) / math.sqrt(k00 * k11)
    print(f"lag {lag:+4d}  corr {c:+.3f}")
