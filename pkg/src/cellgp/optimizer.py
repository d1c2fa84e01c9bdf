"""
Limited-memory quasi-Newton minimizer with multi-start.

The line search is backtracking (halving) under the Armijo condition. Once a
step is accepted, one parabolic interpolation trial may replace it with a
lower point along the same direction.
Points where the objective cannot be evaluated (for example a covariance
matrix that fails to factorize) are reported as ``inf`` and simply rejected
by the line search.
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ObjectiveFailure, OptimizerFailed

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]

_ARMIJO_C = 1e-4
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 60
# the interpolation trial may lengthen an accepted step at most this much;
# bounded first steps can be many orders of magnitude too short
_MAX_EXPAND = 1e8


class Termination(str, enum.Enum):
    GRADIENT_SMALL = "GradientSmall"
    STEP_SMALL = "StepSmall"
    MAX_ITERATIONS = "MaxIterations"
    OBJECTIVE_FAILURE = "ObjectiveFailure"


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    step_tolerance: float = 1e-10
    restarts: int = 10
    seed: int = 0
    # secant pairs kept; None keeps one per dimension, which preserves
    # finite termination on quadratics
    memory: int | None = None
    # optional overrides of the per-class sampling ranges used by model init samplers
    init_ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_iterations < 1 or self.restarts < 1 or (self.memory is not None and self.memory < 1):
            raise ValueError("max_iterations, restarts and memory must be >= 1")
        if not (self.gradient_tolerance > 0 and self.step_tolerance > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class FitTrace:
    values: list[float] = field(default_factory=list)
    termination: Termination = Termination.MAX_ITERATIONS
    iterations: int = 0
    evaluations: int = 0

    @property
    def converged(self) -> bool:
        return self.termination in (Termination.GRADIENT_SMALL, Termination.STEP_SMALL)


def _safe_eval(fn, x):
    try:
        out = fn(x)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.debug("objective evaluation failed: %s", exc)
        return None
    return out


def _two_loop(g: np.ndarray, pairs: deque) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _refine_step(objective, gradient, x, f, slope, d, step, f_step, g_step, trace):
    """
    One interpolation trial after a step has passed the sufficient-decrease test.

    The directional derivative at 0 and at ``step`` define a secant model of
    the slope along ``d``; its root is tried and kept only if it is lower and
    also passes the test. On a quadratic objective this is an exact line
    search, which gives the secant updates their finite termination.
    """
    keep = step, x + step * d, f_step, g_step
    dcurv = g_step @ d - slope
    if not dcurv > 0.0:
        return keep
    trial = -step * slope / dcurv
    if not 0.0 < trial <= _MAX_EXPAND * step or abs(trial - step) <= 1e-3 * step:
        return keep
    x_trial = x + trial * d
    f_trial = _safe_eval(objective, x_trial)
    trace.evaluations += 1
    if (f_trial is None or not np.isfinite(f_trial) or not f_trial < f_step
            or not f_trial <= f + _ARMIJO_C * trial * slope):
        return keep
    g_trial = _safe_eval(gradient, x_trial)
    if g_trial is None or not np.all(np.isfinite(g_trial)):
        return keep
    return trial, x_trial, float(f_trial), np.asarray(g_trial, dtype=np.float64)


def minimize(objective: Objective, gradient: Gradient, x0, cfg: OptimizerConfig = OptimizerConfig()):
    """
    Minimize ``objective`` from ``x0``.

    Returns ``(x_best, trace)``. ``trace.values`` holds the objective at the
    start point and after every accepted step, so it is non-increasing.

    Raises
    ------
    ObjectiveFailure
        If the objective or gradient is not finite at ``x0``, or no descent
        step can be found from ``x0``.
    """
    x = np.array(x0, dtype=np.float64)
    trace = FitTrace()
    f = _safe_eval(objective, x)
    trace.evaluations += 1
    if f is None or not np.isfinite(f):
        raise ObjectiveFailure("objective is not finite at the start point")
    g = _safe_eval(gradient, x)
    if g is None or not np.all(np.isfinite(g)):
        raise ObjectiveFailure("gradient is not finite at the start point")
    g = np.asarray(g, dtype=np.float64)
    f = float(f)
    trace.values.append(f)
    pairs: deque = deque(maxlen=cfg.memory or max(1, x.size))

    while True:
        if np.max(np.abs(g), initial=0.0) <= cfg.gradient_tolerance:
            trace.termination = Termination.GRADIENT_SMALL
            break
        if trace.iterations >= cfg.max_iterations:
            trace.termination = Termination.MAX_ITERATIONS
            break

        d = _two_loop(g, pairs)
        slope = g @ d
        if not slope < 0.0 or not np.isfinite(slope):
            pairs.clear()
            d = -g
            slope = g @ d
        # without curvature information keep the first trial step bounded
        step = 1.0 if pairs else min(1.0, 1.0 / np.max(np.abs(g)))

        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            s = step * d
            if np.max(np.abs(s)) <= cfg.step_tolerance * (1.0 + np.max(np.abs(x))):
                break
            x_new = x + s
            f_new = _safe_eval(objective, x_new)
            trace.evaluations += 1
            if f_new is not None and np.isfinite(f_new) and f_new <= f + _ARMIJO_C * step * slope:
                g_new = _safe_eval(gradient, x_new)
                if g_new is not None and np.all(np.isfinite(g_new)):
                    g_new = np.asarray(g_new, dtype=np.float64)
                    step, x_new, f_new, g_new = _refine_step(
                        objective, gradient, x, f, slope, d, step, f_new, g_new, trace)
                    s = step * d
                    accepted = True
                    break
            step *= _BACKTRACK

        if not accepted:
            if pairs:
                # stale curvature pairs can produce poor directions; retry as steepest descent
                pairs.clear()
                continue
            if trace.iterations == 0:
                trace.termination = Termination.OBJECTIVE_FAILURE
                raise ObjectiveFailure("no descent step found from the start point")
            trace.termination = Termination.STEP_SMALL
            break

        g_new = np.asarray(g_new, dtype=np.float64)
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, float(f_new), g_new
        trace.iterations += 1
        trace.values.append(f)

    return x, trace


@dataclass
class MultiStartResult:
    x: np.ndarray
    fun: float
    trace: FitTrace
    restarts_run: int
    restarts_converged: int
    restarts_failed: int
    starts: list[np.ndarray]
    finals: list[float]


def multi_start(
    objective: Objective,
    gradient: Gradient,
    init_sampler: Callable[[np.random.Generator], np.ndarray],
    cfg: OptimizerConfig = OptimizerConfig(),
) -> MultiStartResult:
    """
    Run ``minimize`` from ``cfg.restarts`` start points and keep the best.

    Start points come from ``init_sampler(rng)`` with a generator seeded by
    ``cfg.seed``; all of them are drawn before any optimization runs, so the
    set of starts does not depend on how individual runs end.
    """
    rng = np.random.default_rng(cfg.seed)
    starts = [np.asarray(init_sampler(rng), dtype=np.float64) for _ in range(cfg.restarts)]
    best = None
    finals: list[float] = []
    converged = failed = 0
    for k, x0 in enumerate(starts):
        try:
            x, trace = minimize(objective, gradient, x0, cfg)
        except ObjectiveFailure as exc:
            log.info("restart %d discarded: %s", k, exc)
            failed += 1
            finals.append(float("inf"))
            continue
        fun = trace.values[-1]
        finals.append(fun)
        converged += trace.converged
        log.debug("restart %d: f=%.10g after %d iterations (%s)", k, fun, trace.iterations,
                  trace.termination.value)
        if best is None or fun < best[1]:
            best = (x, fun, trace)
    if best is None:
        raise OptimizerFailed(f"all {cfg.restarts} restarts failed")
    return MultiStartResult(
        x=best[0],
        fun=best[1],
        trace=best[2],
        restarts_run=len(starts),
        restarts_converged=converged,
        restarts_failed=failed,
        starts=starts,
        finals=finals,
    )
