"""
Independent single-cell GP baseline.

Capacity of one cell is modelled as a basis function of the cycle number plus
a zero-mean GP with the scaled Gaussian kernel and white noise. With the
linear basis, intercept and slope are fitted first by ordinary least squares
and the kernel hyperparameters are then fitted to the residuals by maximum
likelihood. Far from the data the forecast falls back to the basis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite, OptimizerFailed, TooFewPoints
from .kernels import IgpKernelParams, igp_gram
from .numerics import CholFactor, cholesky, half_solve, inverse, solve
from .optimizer import OptimizerConfig, multi_start
from .predictive import PredictiveDistribution, posterior_covariance

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
BASIS_KINDS = ("zero", "linear")


@dataclass
class IgpModel:
    params: IgpKernelParams
    basis: str
    intercept: float
    slope: float
    train_cycles: np.ndarray
    train_caps: np.ndarray
    factor: CholFactor
    residuals_solved: np.ndarray
    loglik: float
    cell: str = ""
    report: dict = field(default_factory=dict)

    def basis_value(self, cycles) -> np.ndarray:
        c = np.asarray(cycles, dtype=np.float64)
        if self.basis == "zero":
            return np.zeros_like(c)
        return self.intercept + self.slope * c

    def predict(self, query_cycles, include_noise: bool = False) -> PredictiveDistribution:
        return igp_predict(self, query_cycles, include_noise=include_noise)


def fit_basis(cycles, caps, basis_kind: str) -> tuple[float, float]:
    """Intercept and slope of the basis (both zero for the zero basis)."""
    if basis_kind not in BASIS_KINDS:
        raise ValueError(f"basis must be one of {BASIS_KINDS}, got {basis_kind!r}")
    if basis_kind == "zero":
        return 0.0, 0.0
    c = np.asarray(cycles, dtype=np.float64)
    a = np.column_stack([np.ones_like(c), c])
    coef, *_ = np.linalg.lstsq(a, np.asarray(caps, dtype=np.float64), rcond=None)
    return float(coef[0]), float(coef[1])


def log_likelihood(params: IgpKernelParams, cycles, residuals) -> float:
    """Gaussian log marginal likelihood of ``residuals`` under the kernel."""
    k = igp_gram(params, cycles, cycles, noise_diag=True)
    f = cholesky(k)
    z = half_solve(f, residuals)
    return float(-0.5 * (z @ z) - 0.5 * f.logdet - 0.5 * z.size * _LOG_2PI)


class _Objective:
    def __init__(self, cycles: np.ndarray, resid: np.ndarray):
        self.t = cycles
        self.r = resid
        self.d2 = (cycles[:, None] - cycles[None, :]) ** 2
        self._x = None
        self._state = None

    def _prepare(self, x):
        if self._x is not None and np.array_equal(x, self._x):
            return
        self._x = np.array(x, copy=True)
        self._state = None
        with np.errstate(over="ignore"):
            e = np.exp(x)
        if not np.all(np.isfinite(e)) or not np.all(e > 0):
            return
        p = IgpKernelParams(float(e[0]), float(e[1]), float(e[2]))
        ks = p.theta_F**2 * np.exp(-0.5 * self.d2 / p.theta_L**2)
        k = ks.copy()
        k[np.diag_indices_from(k)] += p.theta_eps**2
        try:
            f = cholesky(k)
        except NotPositiveDefinite:
            return
        self._state = (p, ks, f)

    def value(self, x) -> float:
        """Deviance, -2 log likelihood."""
        self._prepare(x)
        if self._state is None:
            return math.inf
        _, _, f = self._state
        z = half_solve(f, self.r)
        return float(z @ z + f.logdet + z.size * _LOG_2PI)

    def grad(self, x) -> np.ndarray:
        self._prepare(x)
        if self._state is None:
            return np.full(len(x), np.nan)
        p, ks, f = self._state
        alpha = solve(f, self.r)
        w = inverse(f) - np.outer(alpha, alpha)
        return np.array(
            [
                np.sum(w * 2.0 * ks),
                np.sum(w * ks * self.d2) / p.theta_L**2,
                2.0 * p.theta_eps**2 * np.trace(w),
            ]
        )


def _igp_sampler(cycles: np.ndarray, resid: np.ndarray):
    span = max(float(np.ptp(cycles)), 1.0)
    sd = float(np.std(resid))
    if not sd > 0:
        sd = float(np.sqrt(np.mean(resid**2))) or 1.0

    def sample(rng: np.random.Generator) -> np.ndarray:
        return np.array(
            [
                rng.uniform(math.log(0.1 * sd), math.log(2.0 * sd)),
                rng.uniform(math.log(span / 100.0), math.log(span)),
                rng.uniform(math.log(1e-3 * sd), math.log(0.5 * sd)),
            ]
        )

    return sample


def igp_fit(cycles, caps, basis_kind: str = "linear", restarts: int = 10, seed: int = 0,
            cfg: OptimizerConfig | None = None, cell: str = "") -> IgpModel:
    """
    Fit the single-cell GP.

    Raises
    ------
    TooFewPoints
        With fewer than three observations.
    OptimizerFailed
        If no restart produces a finite likelihood.
    """
    t = np.asarray(cycles, dtype=np.float64)
    y = np.asarray(caps, dtype=np.float64)
    if t.size < 3:
        raise TooFewPoints(f"need at least 3 observations, got {t.size}")
    if t.shape != y.shape:
        raise ValueError("cycles and capacities differ in length")
    if np.unique(t).size != t.size:
        raise ValueError("cycles must be distinct")
    order = np.argsort(t, kind="stable")
    t, y = t[order], y[order]
    intercept, slope = fit_basis(t, y, basis_kind)
    resid = y - (intercept + slope * t if basis_kind == "linear" else 0.0)

    base = cfg or OptimizerConfig()
    cfg = OptimizerConfig(base.max_iterations, base.gradient_tolerance, base.step_tolerance,
                          restarts, seed, base.memory, base.init_ranges)
    obj = _Objective(t, resid)
    with np.errstate(under="ignore"):
        res = multi_start(obj.value, obj.grad, _igp_sampler(t, resid), cfg)
    if not math.isfinite(res.fun):
        raise OptimizerFailed("no restart reached a finite likelihood")
    params = IgpKernelParams.from_vector(res.x)
    model = condition_igp(params, t, y, basis_kind, intercept, slope, cell=cell)
    model.report = {
        "iterations": res.trace.iterations,
        "termination": res.trace.termination.value,
        "restarts_used": res.restarts_run,
        "restarts_converged": res.restarts_converged,
        "start_logliks": [-0.5 * obj.value(x0) for x0 in res.starts],
    }
    return model


def condition_igp(params: IgpKernelParams, cycles, caps, basis_kind: str = "zero",
                  intercept: float = 0.0, slope: float = 0.0, cell: str = "") -> IgpModel:
    """Build a model from fixed kernel parameters and basis coefficients."""
    if basis_kind not in BASIS_KINDS:
        raise ValueError(f"basis must be one of {BASIS_KINDS}, got {basis_kind!r}")
    t = np.asarray(cycles, dtype=np.float64)
    y = np.asarray(caps, dtype=np.float64)
    if basis_kind == "zero":
        intercept = slope = 0.0
    resid = y - (intercept + slope * t)
    f = cholesky(igp_gram(params, t, t, noise_diag=True))
    z = half_solve(f, resid)
    ll = float(-0.5 * (z @ z) - 0.5 * f.logdet - 0.5 * z.size * _LOG_2PI)
    return IgpModel(params, basis_kind, float(intercept), float(slope), t, y, f,
                    solve(f, resid), ll, cell)


def igp_predict(model: IgpModel, query_cycles, include_noise: bool = False) -> PredictiveDistribution:
    """Posterior mean (basis plus GP correction) and covariance at ``query_cycles``."""
    q = np.atleast_1d(np.asarray(query_cycles, dtype=np.float64))
    kq = igp_gram(model.params, q, model.train_cycles)
    kqq = igp_gram(model.params, q, q, noise_diag=include_noise)
    mean = model.basis_value(q) + kq @ model.residuals_solved
    v = half_solve(model.factor, kq.T)
    cov = posterior_covariance(kqq, v, label=model.cell or "igp")
    return PredictiveDistribution(model.cell, q, mean, cov)
