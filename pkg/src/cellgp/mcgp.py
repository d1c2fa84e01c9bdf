"""
Multi-output convolved GP over several cells.

All cells share ``R`` latent GPs; each cell sees every latent through its own
Gaussian smoothing filter, plus white measurement noise. Observations of
all cells are modelled jointly as one zero-mean Gaussian vector, fitted by
minimizing the deviance (-2 log marginal likelihood) and conditioned on to
forecast any training cell at new cycles.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .data import TrainingSet
from .errors import (
    DimensionMismatch,
    ModelFormatError,
    NotPositiveDefinite,
    OptimizerFailed,
)
from .kernels import McgpHyperParams, mcgp_cov_blocks, mcgp_cov_matrix, n_params, param_labels
from .numerics import CholFactor, cholesky, half_solve, inverse, solve
from .optimizer import OptimizerConfig, multi_start
from .predictive import PredictiveDistribution, posterior_covariance

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
FORMAT_NAME = "cellgp-mcgp-model"
FORMAT_VERSION = 1


def _check_dims(hyper: McgpHyperParams, train: TrainingSet) -> None:
    if hyper.m != train.m:
        raise DimensionMismatch(
            f"hyperparameters describe {hyper.m} cells, training set has {train.m}"
        )


def assemble_gram(hyper: McgpHyperParams, train: TrainingSet) -> np.ndarray:
    """Joint prior covariance of all training observations (cell-major order)."""
    _check_dims(hyper, train)
    ci, t = train.cell_index, train.t
    k = mcgp_cov_matrix(hyper, ci, t, ci, t)
    k = np.triu(k) + np.triu(k, 1).T
    k[np.diag_indices_from(k)] += hyper.noise**2
    return k


def _factorize(hyper: McgpHyperParams, train: TrainingSet) -> CholFactor:
    return cholesky(assemble_gram(hyper, train))


def deviance(hyper: McgpHyperParams, train: TrainingSet) -> float:
    """``Y' K^-1 Y + log det K + T log 2pi``, i.e. -2 times the log marginal likelihood."""
    f = _factorize(hyper, train)
    return _deviance_from_factor(f, train.y)


def _deviance_from_factor(f: CholFactor, y: np.ndarray) -> float:
    z = half_solve(f, y)
    return float(z @ z + f.logdet + y.size * _LOG_2PI)


def _grad_from_factor(hyper: McgpHyperParams, train: TrainingSet, f: CholFactor) -> np.ndarray:
    ci, t, y = train.cell_index, train.t, train.y
    m, R = hyper.m, hyper.R
    mr = m * R
    alpha = solve(f, y)
    # dD/dtheta = sum(W * dK/dtheta) with W = K^-1 - alpha alpha'
    w = inverse(f) - np.outer(alpha, alpha)
    lag, var, base = mcgp_cov_blocks(hyper, ci, t, ci, t)
    amp_c = hyper.amplitude[ci]
    members = [ci == i for i in range(m)]
    grad = np.zeros(hyper.size)
    for r in range(R):
        wb = w * base[r]
        u = wb @ amp_c[:, r]
        dbase_dv = base[r] * (0.5 * lag * lag / var[r] ** 2 - 0.5 / var[r])
        h = w * np.outer(amp_c[:, r], amp_c[:, r]) * dbase_dv
        rows = h.sum(axis=1)
        for i in range(m):
            grad[i * R + r] = 2.0 * u[members[i]].sum()
            grad[mr + i * R + r] = 4.0 * hyper.smoother_width[i, r] ** 2 * rows[members[i]].sum()
        grad[2 * mr + r] = 2.0 * hyper.latent_width[r] ** 2 * rows.sum()
    grad[-1] = 2.0 * hyper.noise**2 * np.trace(w)
    return grad


def deviance_grad(hyper: McgpHyperParams, train: TrainingSet) -> np.ndarray:
    """
    Gradient of ``deviance`` over the hyperparameter vector.

    Per parameter: ``tr(K^-1 dK) - Y' K^-1 dK K^-1 Y``. Amplitudes are
    differentiated directly, widths and noise through their logarithms.
    """
    _check_dims(hyper, train)
    return _grad_from_factor(hyper, train, _factorize(hyper, train))


def deviance_and_grad(hyper: McgpHyperParams, train: TrainingSet) -> tuple[float, np.ndarray]:
    _check_dims(hyper, train)
    f = _factorize(hyper, train)
    return _deviance_from_factor(f, train.y), _grad_from_factor(hyper, train, f)


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


@dataclass
class FitReport:
    final_deviance: float
    final_loglik: float
    iterations: int
    restarts_used: int
    restarts_converged: int
    jitter_used: float
    termination: str

    @classmethod
    def unfitted(cls, dev: float, jitter: float) -> "FitReport":
        return cls(dev, -0.5 * dev, 0, 0, 0, jitter, "NotFitted")


@dataclass
class McgpModel:
    hyper: McgpHyperParams
    train: TrainingSet
    factor: CholFactor
    alpha: np.ndarray
    fit_report: FitReport
    metadata: dict = field(default_factory=dict)

    @classmethod
    def condition(cls, hyper: McgpHyperParams, train: TrainingSet,
                  fit_report: FitReport | None = None, metadata: dict | None = None) -> "McgpModel":
        """Build a model from fixed hyperparameters, without any fitting."""
        _check_dims(hyper, train)
        f = _factorize(hyper, train)
        alpha = solve(f, train.y)
        if fit_report is None:
            fit_report = FitReport.unfitted(_deviance_from_factor(f, train.y), f.jitter_used)
        return cls(hyper, train, f, alpha, fit_report, dict(metadata or {}))

    @property
    def deviance(self) -> float:
        return self.fit_report.final_deviance

    @property
    def loglik(self) -> float:
        return self.fit_report.final_loglik

    def predict(self, cell: str, query_cycles, include_noise: bool = False) -> PredictiveDistribution:
        return mcgp_predict(self, cell, query_cycles, include_noise=include_noise)


def _data_scales(train: TrainingSet) -> tuple[float, float, float]:
    y = train.y
    span = float(np.ptp(train.t)) if train.T > 1 else 1.0
    span = max(span, 1.0)
    rms = float(np.sqrt(np.mean(y * y))) if y.size else 0.0
    sd = float(np.std(y)) if y.size > 1 else 0.0
    if not rms > 0:
        rms = 1.0
    if not sd > 0:
        sd = rms
    return span, rms, sd


def _amplitude_scale(train: TrainingSet) -> float:
    span, rms, _ = _data_scales(train)
    return rms * math.sqrt(span)


def init_sampler(train: TrainingSet, R: int, ranges=None):
    """
    Random start points for the hyperparameter vector.

    * amplitudes ~ U(-a, a), ``a = 2 * rms(Y) * sqrt(span)``
    * log widths (smoother and latent) ~ U(log(span / 100), log(span))
    * log noise ~ U(log(0.001 sd(Y)), log(0.5 sd(Y)))

    ``span`` is the cycle range of the training data. ``ranges`` may override
    any of the keys ``amplitude``, ``log_smoother_width``, ``log_latent_width``,
    ``log_noise`` with explicit ``(low, high)`` bounds.
    """
    m = train.m
    span, rms, sd = _data_scales(train)
    a = 2.0 * rms * math.sqrt(span)
    bounds = {
        "amplitude": (-a, a),
        "log_smoother_width": (math.log(span / 100.0), math.log(span)),
        "log_latent_width": (math.log(span / 100.0), math.log(span)),
        "log_noise": (math.log(1e-3 * sd), math.log(0.5 * sd)),
    }
    bounds.update(ranges or {})

    def sample(rng: np.random.Generator) -> np.ndarray:
        return np.concatenate(
            [
                rng.uniform(*bounds["amplitude"], size=m * R),
                rng.uniform(*bounds["log_smoother_width"], size=m * R),
                rng.uniform(*bounds["log_latent_width"], size=R),
                rng.uniform(*bounds["log_noise"], size=1),
            ]
        )

    return sample


class _Objective:
    """Deviance and gradient over the flat vector, sharing one factorization per point."""

    def __init__(self, train: TrainingSet, R: int):
        self.train = train
        self.R = R
        self._x = None
        self._hyper = None
        self._factor = None

    def _prepare(self, x: np.ndarray):
        if self._x is not None and np.array_equal(x, self._x):
            return
        self._x = np.array(x, copy=True)
        self._hyper = None
        self._factor = None
        with np.errstate(over="ignore", under="ignore"):
            hyper = McgpHyperParams.from_vector(x, self.train.m, self.R)
        widths = np.concatenate([np.ravel(hyper.smoother_width), np.ravel(hyper.latent_width)])
        # a far-negative log width makes the kernel variance underflow to 0,
        # which is as infeasible as an infinite one
        with np.errstate(under="ignore"):
            feasible = np.all(np.isfinite(widths)) and np.all(widths * widths > 0)
        if not (feasible and math.isfinite(hyper.noise)):
            return
        try:
            self._factor = _factorize(hyper, self.train)
        except NotPositiveDefinite:
            return
        self._hyper = hyper

    def value(self, x: np.ndarray) -> float:
        self._prepare(x)
        if self._factor is None:
            return math.inf
        return _deviance_from_factor(self._factor, self.train.y)

    def grad(self, x: np.ndarray) -> np.ndarray:
        self._prepare(x)
        if self._factor is None:
            return np.full(x.shape, np.nan)
        return _grad_from_factor(self._hyper, self.train, self._factor)


def mcgp_fit(train: TrainingSet, R: int = 2, restarts: int = 10, seed: int = 0,
             cfg: OptimizerConfig | None = None) -> McgpModel:
    """
    Fit hyperparameters by multi-start minimization of the deviance.

    ``restarts`` and ``seed`` override the corresponding fields of ``cfg``.
    """
    if R < 1:
        raise ValueError("need at least one latent function")
    if train.T < 1:
        raise ValueError("empty training set")
    cfg = cfg or OptimizerConfig()
    cfg = OptimizerConfig(
        max_iterations=cfg.max_iterations,
        gradient_tolerance=cfg.gradient_tolerance,
        step_tolerance=cfg.step_tolerance,
        restarts=restarts,
        seed=seed,
        memory=cfg.memory,
        init_ranges=cfg.init_ranges,
    )
    obj = _Objective(train, R)
    # amplitudes live on the data scale, the rest in log space; optimize in
    # coordinates where both are O(1) so the secant updates start well scaled
    scale = np.ones(n_params(train.m, R))
    scale[: train.m * R] = _amplitude_scale(train)
    sampler = init_sampler(train, R, cfg.init_ranges)
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        res = multi_start(
            lambda z: obj.value(z * scale),
            lambda z: obj.grad(z * scale) * scale,
            lambda rng: sampler(rng) / scale,
            cfg,
        )
    hyper = McgpHyperParams.from_vector(res.x * scale, train.m, R)
    f = _factorize(hyper, train)
    dev = _deviance_from_factor(f, train.y)
    report = FitReport(
        final_deviance=dev,
        final_loglik=-0.5 * dev,
        iterations=res.trace.iterations,
        restarts_used=res.restarts_run,
        restarts_converged=res.restarts_converged,
        jitter_used=f.jitter_used,
        termination=res.trace.termination.value,
    )
    if not math.isfinite(dev):
        raise OptimizerFailed("best restart has a non-finite deviance")
    log.info("fit: deviance %.6g after %d iterations, %d/%d restarts converged", dev,
             report.iterations, res.restarts_converged, res.restarts_run)
    return McgpModel(hyper, train, f, solve(f, train.y), report)


# --------------------------------------------------------------------------
# prediction
# --------------------------------------------------------------------------


def mcgp_predict(model: McgpModel, cell: str, query_cycles, include_noise: bool = False
                 ) -> PredictiveDistribution:
    """
    Posterior over ``cell``'s capacity at ``query_cycles``.

    By default the noise-free capacity trend is predicted; ``include_noise``
    adds the measurement noise variance to the diagonal.
    """
    j = model.train.index_of(cell)
    q = np.atleast_1d(np.asarray(query_cycles, dtype=np.float64))
    cq = np.full(q.size, j, dtype=np.intp)
    train = model.train
    kqx = mcgp_cov_matrix(model.hyper, cq, q, train.cell_index, train.t)
    kqq = mcgp_cov_matrix(model.hyper, cq, q, cq, q)
    kqq = np.triu(kqq) + np.triu(kqq, 1).T
    if include_noise:
        kqq[np.diag_indices_from(kqq)] += model.hyper.noise**2
    mean = kqx @ model.alpha
    v = half_solve(model.factor, kqx.T)
    cov = posterior_covariance(kqq, v, label=cell)
    return PredictiveDistribution(cell, q, mean, cov)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def dumps_model(model: McgpModel) -> str:
    """
    Serialize to text: optional ``#`` header lines followed by a JSON body.

    Floats are written with ``repr`` precision, so loading and saving again
    reproduces the same bytes.
    """
    train = model.train
    body = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "cells": list(train.cells),
        "latent_functions": model.hyper.R,
        "training": {
            "digest": train.digest(),
            "cycles": {c: [float(v) for v in t] for c, t in zip(train.cells, train.cycles)},
            "capacities": {c: [float(v) for v in y] for c, y in zip(train.cells, train.capacities)},
        },
        "hyperparameter_layout": param_labels(model.hyper.m, model.hyper.R),
        "hyperparameters": [float(v) for v in model.hyper.to_vector()],
        "fit_report": asdict(model.fit_report),
        "metadata": model.metadata.get("extra", {}),
    }
    header = model.metadata.get("header", [])
    lines = [f"# {h}" for h in header]
    lines.append(json.dumps(_jsonable(body), indent=1))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> McgpModel:
    header, body_lines = [], []
    for line in text.splitlines():
        if not body_lines and line.startswith("#"):
            header.append(line[2:] if line.startswith("# ") else line[1:])
        else:
            body_lines.append(line)
    try:
        body = json.loads("\n".join(body_lines))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model body is not valid JSON: {exc}") from None
    if body.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a cellgp model file")
    if body.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {body.get('format_version')}")
    try:
        cells = body["cells"]
        tr = body["training"]
        train = TrainingSet(cells, [tr["cycles"][c] for c in cells],
                            [tr["capacities"][c] for c in cells])
        if train.digest() != tr["digest"]:
            raise ModelFormatError("training data does not match its digest")
        R = int(body["latent_functions"])
        hyper = McgpHyperParams.from_vector(body["hyperparameters"], len(cells), R)
        report = FitReport(**body["fit_report"])
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
    meta = {"header": header, "extra": body.get("metadata", {})}
    f = _factorize(hyper, train)
    return McgpModel(hyper, train, f, solve(f, train.y), report, meta)


def save_model(model: McgpModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> McgpModel:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())


def default_header(command: str = "") -> list[str]:
    lines = [f"cellgp {__version__}"]
    if command:
        lines.append(command)
    return lines
