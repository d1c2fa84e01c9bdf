"""
Synthetic data for demos and tests.

``sample_prior`` draws capacity-like trajectories from a multi-output
convolved GP with known hyperparameters. ``fade_curves`` produces smooth
capacity-fade trajectories for several cells that look roughly like lab
cycling data. They are illustrative only and are not a substitute for
measured capacities.
"""

from __future__ import annotations

import numpy as np

from .data import CapacitySeries, TrainingSet
from .kernels import McgpHyperParams
from .mcgp import assemble_gram
from .numerics import cholesky


def sample_prior(hyper: McgpHyperParams, cycles_per_cell, seed=None, cells=None):
    """
    Draw one joint sample at the given cycles of every cell.

    Returns ``(latent, observed)``: lists of per-cell arrays without and with
    the white measurement noise.
    """
    rng = np.random.default_rng(seed)
    cycles_per_cell = [np.asarray(c, dtype=np.float64) for c in cycles_per_cell]
    cells = cells or [f"cell{i}" for i in range(len(cycles_per_cell))]
    shell = TrainingSet(list(cells), cycles_per_cell, [np.zeros_like(c) for c in cycles_per_cell])
    k = assemble_gram(hyper, shell)
    k[np.diag_indices_from(k)] -= hyper.noise**2
    f = cholesky(k).lower @ rng.standard_normal(shell.T)
    y = f + hyper.noise * rng.standard_normal(shell.T)
    splits = np.cumsum([c.size for c in cycles_per_cell])[:-1]
    return np.split(f, splits), np.split(y, splits)


def fade_curves(n_cycles: int = 168, seed: int = 0, cells=("B0005", "B0006", "B0007"),
                noise: float = 0.004) -> list[CapacitySeries]:
    """
    Capacity-fade trajectories sharing a common shape with cell-specific scale,
    offset and small periodic recovery bumps.
    """
    rng = np.random.default_rng(seed)
    k = np.arange(1, n_cycles + 1, dtype=np.float64)
    shared = 0.0028 * k + 0.35 * (1.0 - np.exp(-k / 260.0)) - 0.0000045 * k**2
    out = []
    # (start capacity, fade rate multiplier) cycled over the requested cells
    shapes = [(1.86, 1.0), (2.03, 1.4), (1.89, 0.75)]
    for idx, cell in enumerate(cells):
        start, rate = shapes[idx % len(shapes)]
        bumps = 0.02 * np.exp(-0.5 * ((k[:, None] - np.array([30.0, 48.0, 89.0, 120.0])) / 1.5) ** 2).sum(1)
        cap = start - rate * shared + bumps + noise * rng.standard_normal(n_cycles)
        out.append(CapacitySeries(cell, k.astype(int), np.maximum(cap, 0.05)))
    return out
