"""
Convert NASA PCoE battery ``.mat`` files (B0005.mat, B0006.mat, ...) into the
capacity CSV read by ``cellgp``.

Each discharge cycle contributes one row; discharge cycles are numbered 1..N
in file order, so the cycle column counts discharges rather than the raw
record index (which interleaves charge and impedance records).

    python scripts/nasa_mat_to_csv.py B0005.mat B0006.mat B0007.mat -o data/nasa_capacity.csv

The cell id is the stem of each file name.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
from scipy.io import loadmat

from cellgp.data import CapacitySeries, save_csv


def discharge_capacities(path: str) -> CapacitySeries:
    cell = os.path.splitext(os.path.basename(path))[0]
    mat = loadmat(path, simplify_cells=True)
    if cell not in mat:
        keys = [k for k in mat if not k.startswith("__")]
        if len(keys) != 1:
            raise ValueError(f"{path}: cannot find the battery record (keys {keys})")
        cell = keys[0]
    caps = []
    for rec in mat[cell]["cycle"]:
        if str(rec["type"]).strip() != "discharge":
            continue
        cap = np.atleast_1d(rec["data"]["Capacity"]).astype(float)
        if cap.size and np.isfinite(cap[0]) and cap[0] > 0:
            caps.append(float(cap[0]))
    if not caps:
        raise ValueError(f"{path}: no discharge capacities found")
    return CapacitySeries(cell, np.arange(1, len(caps) + 1), np.array(caps))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("mat", nargs="+", help="NASA battery .mat files")
    ap.add_argument("-o", "--out", required=True)
    args = ap.parse_args(argv)
    series = [discharge_capacities(p) for p in args.mat]
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    save_csv(series, args.out, comments=["source: NASA PCoE battery data set, discharge capacity per cycle"])
    for s in series:
        print(f"{s.cell_id}: {len(s)} discharge cycles, {s.capacities[0]:.4f} -> {s.capacities[-1]:.4f} Ah")
    return 0


if __name__ == "__main__":
    sys.exit(main())
