"""
Covariance functions.

Two families live here:

* the scaled Gaussian kernel of the single-cell (independent) GP, with an
  optional white-noise term and optional covariate length-scales;
* the convolved multi-output kernel. Each cell's capacity is a sum over
  latent GPs, each smoothed by a Gaussian filter. Because the filters and the
  latent kernel are both normalized Gaussians, the double convolution
  collapses to a single Gaussian in the lag whose variance is the sum of the
  three squared widths.

Hyperparameter vector layout for the multi-output kernel (used by the
optimizer and by model persistence)::

    [amplitude (m*R, row-major), log smoother_width (m*R, row-major),
     log latent_width (R), log noise]
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange


# --------------------------------------------------------------------------
# independent GP kernel
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IgpKernelParams:
    theta_F: float
    theta_L: float
    theta_eps: float
    theta_x: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "theta_x", tuple(float(v) for v in self.theta_x))
        for name in ("theta_F", "theta_L", "theta_eps"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if any(not v > 0.0 for v in self.theta_x):
            raise ValueError("covariate length-scales must be strictly positive")

    def to_vector(self) -> np.ndarray:
        """Log-space vector ``[log F, log L, log eps, log x_1, ...]``."""
        return np.log([self.theta_F, self.theta_L, self.theta_eps, *self.theta_x])

    @classmethod
    def from_vector(cls, v) -> "IgpKernelParams":
        e = np.exp(np.asarray(v, dtype=np.float64))
        return cls(float(e[0]), float(e[1]), float(e[2]), tuple(e[3:]))


def igp_kernel(p: IgpKernelParams, t, x_t, t2, x_t2, same_observation: bool) -> float:
    """Scaled Gaussian covariance between two cycles plus the noise delta."""
    x_t = np.atleast_1d(np.asarray(x_t if x_t is not None else (), dtype=np.float64))
    x_t2 = np.atleast_1d(np.asarray(x_t2 if x_t2 is not None else (), dtype=np.float64))
    if x_t.size != len(p.theta_x) or x_t2.size != len(p.theta_x):
        raise DimensionMismatch(
            f"expected {len(p.theta_x)} covariates, got {x_t.size} and {x_t2.size}"
        )
    q = ((t - t2) / p.theta_L) ** 2
    if p.theta_x:
        q += float(np.sum(((x_t - x_t2) / np.asarray(p.theta_x)) ** 2))
    k = p.theta_F**2 * math.exp(-0.5 * q)
    if same_observation:
        k += p.theta_eps**2
    return k


def igp_gram(p: IgpKernelParams, t1, t2, x1=None, x2=None, noise_diag: bool = False) -> np.ndarray:
    """
    Matrix of ``igp_kernel`` values between two sets of cycles.

    ``noise_diag`` adds ``theta_eps**2`` on the diagonal and is only meaningful
    when both arguments are the same observation set.
    """
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    q = ((t1[:, None] - t2[None, :]) / p.theta_L) ** 2
    if p.theta_x:
        x1 = np.asarray(x1, dtype=np.float64).reshape(len(t1), -1)
        x2 = np.asarray(x2, dtype=np.float64).reshape(len(t2), -1)
        if x1.shape[1] != len(p.theta_x) or x2.shape[1] != len(p.theta_x):
            raise DimensionMismatch("covariate columns do not match theta_x")
        ls = np.asarray(p.theta_x)
        q = q + np.sum(((x1[:, None, :] - x2[None, :, :]) / ls) ** 2, axis=-1)
    k = p.theta_F**2 * np.exp(-0.5 * q)
    if noise_diag:
        if k.shape[0] != k.shape[1]:
            raise DimensionMismatch("noise_diag needs a square matrix")
        k[np.diag_indices_from(k)] += p.theta_eps**2
    return k


# --------------------------------------------------------------------------
# convolved multi-output kernel
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class McgpHyperParams:
    """
    amplitude[i, r]      smoother amplitude linking cell i to latent r (any sign)
    smoother_width[i, r] smoother width in cycles (> 0)
    latent_width[r]      latent kernel width in cycles (> 0)
    noise                white measurement noise scale (> 0)
    """

    amplitude: np.ndarray
    smoother_width: np.ndarray
    latent_width: np.ndarray
    noise: float

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=np.float64, ndmin=2)
        sw = np.array(self.smoother_width, dtype=np.float64, ndmin=2)
        lw = np.array(self.latent_width, dtype=np.float64, ndmin=1)
        if amp.ndim != 2 or amp.shape != sw.shape or lw.shape != (amp.shape[1],):
            raise DimensionMismatch(
                f"inconsistent shapes: amplitude {amp.shape}, smoother_width {sw.shape}, "
                f"latent_width {lw.shape}"
            )
        if not (np.all(sw > 0) and np.all(lw > 0) and self.noise > 0):
            raise ValueError("widths and noise must be strictly positive")
        for a in (amp, sw, lw):
            a.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "smoother_width", sw)
        object.__setattr__(self, "latent_width", lw)
        object.__setattr__(self, "noise", float(self.noise))

    @property
    def m(self) -> int:
        return self.amplitude.shape[0]

    @property
    def R(self) -> int:
        return self.amplitude.shape[1]

    @property
    def size(self) -> int:
        return n_params(self.m, self.R)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.amplitude.ravel(),
                np.log(self.smoother_width).ravel(),
                np.log(self.latent_width),
                [math.log(self.noise)],
            ]
        )

    @classmethod
    def from_vector(cls, v, m: int, R: int) -> "McgpHyperParams":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (n_params(m, R),):
            raise DimensionMismatch(f"expected {n_params(m, R)} parameters, got {v.shape}")
        mr = m * R
        return cls(
            amplitude=v[:mr].reshape(m, R),
            smoother_width=np.exp(v[mr : 2 * mr]).reshape(m, R),
            latent_width=np.exp(v[2 * mr : 2 * mr + R]),
            noise=float(np.exp(v[-1])),
        )

    def vector_labels(self) -> list[str]:
        return param_labels(self.m, self.R)


def n_params(m: int, R: int) -> int:
    return 2 * m * R + R + 1


def param_labels(m: int, R: int) -> list[str]:
    """Names for each slot of the hyperparameter vector, 1-based like the usual notation."""
    amp = [f"amplitude[{i + 1},{r + 1}]" for i in range(m) for r in range(R)]
    sw = [f"log smoother_width[{i + 1},{r + 1}]" for i in range(m) for r in range(R)]
    lw = [f"log latent_width[{r + 1}]" for r in range(R)]
    return amp + sw + lw + ["log noise"]


def smoother(amplitude: float, width: float, lag):
    """Gaussian smoothing filter with the given amplitude and width."""
    lag = np.asarray(lag, dtype=np.float64)
    out = amplitude / math.sqrt(2.0 * math.pi * width**2) * np.exp(-0.5 * (lag / width) ** 2)
    return out if out.ndim else float(out)


def latent_kernel(width: float, lag):
    """Normalized Gaussian covariance of a latent function."""
    return smoother(1.0, width, lag)


def _gauss(d, v):
    return np.exp(-0.5 * d * d / v) / np.sqrt(2.0 * np.pi * v)


def _check_cells(p: McgpHyperParams, *cells: int) -> None:
    for c in cells:
        if not 0 <= c < p.m:
            raise IndexOutOfRange(f"cell index {c} outside [0, {p.m})")


def mcgp_cross_cov(p: McgpHyperParams, i: int, t: float, j: int, t2: float,
                   same_observation: bool) -> float:
    """Covariance between cell ``i`` at cycle ``t`` and cell ``j`` at cycle ``t2``."""
    _check_cells(p, i, j)
    d = float(t) - float(t2)
    # i/j swapped in the sum must give bit-identical results, hence the sorted pair
    a, b = (i, j) if i <= j else (j, i)
    k = 0.0
    for r in range(p.R):
        v = p.smoother_width[a, r] ** 2 + p.smoother_width[b, r] ** 2 + p.latent_width[r] ** 2
        k += p.amplitude[a, r] * p.amplitude[b, r] * math.exp(-0.5 * d * d / v) / math.sqrt(
            2.0 * math.pi * v
        )
    if same_observation:
        k += p.noise**2
    return k


def mcgp_cross_cov_grad(p: McgpHyperParams, i: int, t: float, j: int, t2: float,
                        same_observation: bool) -> np.ndarray:
    """
    Gradient of ``mcgp_cross_cov`` with respect to the hyperparameter vector.

    Amplitudes are differentiated in raw space, all widths and the noise in
    log space, matching ``McgpHyperParams.to_vector``.
    """
    _check_cells(p, i, j)
    m, R = p.m, p.R
    mr = m * R
    g = np.zeros(n_params(m, R))
    d = float(t) - float(t2)
    for r in range(R):
        wi, wj, wr = p.smoother_width[i, r], p.smoother_width[j, r], p.latent_width[r]
        v = wi**2 + wj**2 + wr**2
        base = math.exp(-0.5 * d * d / v) / math.sqrt(2.0 * math.pi * v)
        dbase_dv = base * (0.5 * d * d / v**2 - 0.5 / v)
        si, sj = p.amplitude[i, r], p.amplitude[j, r]
        g[i * R + r] += sj * base
        g[j * R + r] += si * base
        # d v / d log w = 2 w^2; when i == j both smoother slots are the same parameter
        g[mr + i * R + r] += si * sj * dbase_dv * 2.0 * wi**2
        g[mr + j * R + r] += si * sj * dbase_dv * 2.0 * wj**2
        g[2 * mr + r] += si * sj * dbase_dv * 2.0 * wr**2
    if same_observation:
        g[-1] = 2.0 * p.noise**2
    return g


def mcgp_cov_blocks(p: McgpHyperParams, cells_a, t_a, cells_b, t_b):
    """
    Per-latent pieces of the cross-covariance between two point sets.

    Returns ``(lag, var, base)`` where ``base[r]`` is the normalized Gaussian in
    the lag with variance ``var[r]``; the covariance without noise is
    ``sum_r S[a, r] S[b, r] base[r]``.
    """
    ca = np.asarray(cells_a, dtype=np.intp)
    cb = np.asarray(cells_b, dtype=np.intp)
    if ca.size and (ca.min() < 0 or ca.max() >= p.m) or cb.size and (cb.min() < 0 or cb.max() >= p.m):
        raise IndexOutOfRange("cell index outside the hyperparameter table")
    lag = np.asarray(t_a, dtype=np.float64)[:, None] - np.asarray(t_b, dtype=np.float64)[None, :]
    sw2 = p.smoother_width**2
    var = sw2[ca][:, None, :] + sw2[cb][None, :, :] + p.latent_width**2
    var = np.moveaxis(var, -1, 0)
    base = _gauss(lag[None, :, :], var)
    return lag, var, base


def mcgp_cov_matrix(p: McgpHyperParams, cells_a, t_a, cells_b, t_b, same=None) -> np.ndarray:
    """
    Vectorized ``mcgp_cross_cov`` over two point sets.

    ``same`` is an optional boolean matrix marking pairs that are the same
    observation; those entries receive the noise variance.
    """
    ca = np.asarray(cells_a, dtype=np.intp)
    cb = np.asarray(cells_b, dtype=np.intp)
    _, _, base = mcgp_cov_blocks(p, ca, t_a, cb, t_b)
    amp = p.amplitude
    k = np.einsum("ar,br,rab->ab", amp[ca], amp[cb], base)
    if same is not None:
        k = k + p.noise**2 * np.asarray(same, dtype=np.float64)
    return k
