"""
Dense linear algebra and quadrature helpers.

Covariance matrices here are small (a few hundred rows at most), so every
routine is a plain dense O(n^3) LAPACK call. The Cholesky wrapper owns the
package-wide policy for restoring positive definiteness with jitter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NotPositiveDefinite

log = logging.getLogger(__name__)

#: Jitter levels tried in order, as multiples of mean(diag(m)).
JITTER_LADDER = (1e-10, 1e-8, 1e-6, 1e-4)


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor of ``m + jitter_used * I``."""

    lower: np.ndarray
    logdet: float
    jitter_used: float = 0.0

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def as_sym_matrix(m) -> np.ndarray:
    """Validate ``m`` as a finite, square, exactly symmetric float64 matrix."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    if not np.array_equal(a, a.T):
        raise DimensionMismatch("matrix is not symmetric")
    return a


def _try_cholesky(a: np.ndarray) -> np.ndarray | None:
    try:
        lower = linalg.cholesky(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    if not np.all(np.diag(lower) > 0.0):
        return None
    return lower


def cholesky(m) -> CholFactor:
    """
    Factorize a symmetric positive definite matrix.

    If the plain factorization fails, the jitter levels in ``JITTER_LADDER``
    (scaled by the mean diagonal) are added in turn until one succeeds.

    Raises
    ------
    NotPositiveDefinite
        When every jitter level fails.
    """
    a = as_sym_matrix(m)
    lower = _try_cholesky(a)
    jitter = 0.0
    if lower is None:
        scale = float(np.mean(np.diag(a)))
        if not scale > 0.0:
            raise NotPositiveDefinite("mean diagonal is not positive")
        eye = np.eye(a.shape[0])
        for level in JITTER_LADDER:
            jitter = level * scale
            lower = _try_cholesky(a + jitter * eye)
            if lower is not None:
                log.debug("cholesky needed jitter %.3e", jitter)
                break
        else:
            raise NotPositiveDefinite(
                f"matrix of size {a.shape[0]} not positive definite even with jitter {jitter:.3e}"
            )
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return CholFactor(lower=lower, logdet=logdet, jitter_used=jitter)


def solve(f: CholFactor, rhs) -> np.ndarray:
    """Solve ``(m + jitter I) x = rhs`` for a vector or a matrix of right-hand sides."""
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factor has dimension {f.n}")
    return linalg.cho_solve((f.lower, True), b, check_finite=False)


def inverse(f: CholFactor) -> np.ndarray:
    """Explicit inverse from a factor; symmetrized to remove rounding asymmetry."""
    inv = solve(f, np.eye(f.n))
    return 0.5 * (inv + inv.T)


def half_solve(f: CholFactor, rhs) -> np.ndarray:
    """Return ``L^{-1} rhs``."""
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factor has dimension {f.n}")
    return linalg.solve_triangular(f.lower, b, lower=True, check_finite=False)


def quad_double_integral(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    center: tuple[float, float],
    half_width: float,
    n_nodes: int = 256,
    transform=None,
) -> float:
    """
    Tensor-product Gauss-Legendre estimate of a double integral.

    Integrates ``f(x, y)`` over the square ``center +/- half_width``. The
    integrand must accept broadcastable arrays.

    ``transform`` optionally supplies a 2x2 matrix ``A``; the square then
    lives in ``z`` coordinates and the integration points are
    ``center + A @ z`` with the Jacobian ``|det A|`` applied. This is an exact
    change of variables, used to align the grid with a strongly correlated
    integrand.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    z = half_width * nodes
    w = half_width * weights
    zx = z[:, None]
    zy = z[None, :]
    cx, cy = float(center[0]), float(center[1])
    if transform is None:
        x, y, jac = cx + zx, cy + zy, 1.0
    else:
        a = np.asarray(transform, dtype=np.float64)
        x = cx + a[0, 0] * zx + a[0, 1] * zy
        y = cy + a[1, 0] * zx + a[1, 1] * zy
        jac = abs(float(np.linalg.det(a)))
    vals = np.broadcast_to(f(x, y), (n_nodes, n_nodes))
    return float(jac * (w @ vals @ w))
