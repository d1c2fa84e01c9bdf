"""
Capacity trajectories: CSV ingestion, downsampling and train/held-out splits.

CSV schema::

    cell_id,cycle,capacity_ah
    B0005,1,1.856487
    ...

UTF-8, LF line endings, one row per (cell, cycle). Lines starting with ``#``
are treated as comments.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DataError,
    DuplicateCycle,
    NonPositiveCapacity,
    ParseError,
    TrainCountExceedsData,
    UnknownCell,
)

CSV_HEADER = "cell_id,cycle,capacity_ah"


@dataclass(frozen=True)
class CapacitySeries:
    cell_id: str
    cycles: np.ndarray
    capacities: np.ndarray

    def __post_init__(self):
        cyc = np.asarray(self.cycles)
        if cyc.size and not np.all(cyc == np.round(cyc)):
            raise DataError(f"{self.cell_id}: cycles must be integers")
        cyc = cyc.astype(np.int64)
        cap = np.asarray(self.capacities, dtype=np.float64)
        if cyc.shape != cap.shape or cyc.ndim != 1:
            raise DataError(f"{self.cell_id}: cycles and capacities differ in length")
        if cyc.size and (np.any(np.diff(cyc) <= 0) or cyc[0] < 1):
            raise DataError(f"{self.cell_id}: cycles must be positive and strictly increasing")
        if np.any(~(cap > 0)):
            raise NonPositiveCapacity(f"{self.cell_id}: capacities must be positive")
        cyc.setflags(write=False)
        cap.setflags(write=False)
        object.__setattr__(self, "cycles", cyc)
        object.__setattr__(self, "capacities", cap)

    def __len__(self) -> int:
        return self.cycles.size

    def head(self, n: int) -> "CapacitySeries":
        return CapacitySeries(self.cell_id, self.cycles[:n], self.capacities[:n])

    def tail(self, n_skip: int) -> "CapacitySeries":
        return CapacitySeries(self.cell_id, self.cycles[n_skip:], self.capacities[n_skip:])


def load_csv(path) -> list[CapacitySeries]:
    """
    Read capacity series from a CSV file.

    Series come back in order of first appearance of each cell id, each
    sorted by cycle.
    """
    rows: dict[str, dict[int, float]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header_seen = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.endswith("\r"):
                raise ParseError("CRLF line endings are not accepted", lineno)
            if not line.strip() or line.startswith("#"):
                continue
            if not header_seen:
                if line != CSV_HEADER:
                    raise ParseError(f"expected header {CSV_HEADER!r}, got {line!r}", lineno)
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}", lineno)
            cell, cyc_s, cap_s = parts
            if not cell:
                raise ParseError("empty cell_id", lineno)
            try:
                cyc = int(cyc_s)
            except ValueError:
                raise ParseError(f"cycle {cyc_s!r} is not an integer", lineno) from None
            if cyc < 1:
                raise ParseError(f"cycle {cyc} is not positive", lineno)
            try:
                cap = float(cap_s)
            except ValueError:
                raise ParseError(f"capacity {cap_s!r} is not a number", lineno) from None
            if not (math.isfinite(cap) and cap > 0):
                raise NonPositiveCapacity(f"capacity {cap_s!r} is not positive", lineno)
            per_cell = rows.setdefault(cell, {})
            if cyc in per_cell:
                raise DuplicateCycle(f"duplicate cycle {cyc} for cell {cell}", lineno)
            per_cell[cyc] = cap
        if not header_seen:
            raise ParseError("missing header line", 1)
    out = []
    for cell, d in rows.items():
        cycles = sorted(d)
        out.append(CapacitySeries(cell, np.array(cycles), np.array([d[c] for c in cycles])))
    return out


def save_csv(series: Iterable[CapacitySeries], path, comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(CSV_HEADER + "\n")
        for s in series:
            if "," in s.cell_id:
                raise DataError(f"cell id {s.cell_id!r} contains a comma")
            for cyc, cap in zip(s.cycles, s.capacities):
                fh.write(f"{s.cell_id},{int(cyc)},{float(cap)!r}\n")


def downsample(s: CapacitySeries, stride: int = 3, phase: int = 0) -> CapacitySeries:
    """Keep positions ``k`` with ``k % stride == phase``."""
    if stride < 1 or not 0 <= phase < stride:
        raise ValueError("need stride >= 1 and 0 <= phase < stride")
    return CapacitySeries(s.cell_id, s.cycles[phase::stride], s.capacities[phase::stride])


@dataclass(frozen=True)
class Scenario:
    name: str
    target_cell: str
    train_cycles_per_cell: Mapping[str, int]
    downsample_stride: int = 3
    downsample_phase: int = 0

    def __post_init__(self):
        if self.downsample_stride < 1 or not 0 <= self.downsample_phase < self.downsample_stride:
            raise ValueError("need stride >= 1 and 0 <= phase < stride")
        if self.target_cell not in self.train_cycles_per_cell:
            raise DataError(f"target cell {self.target_cell} has no training count")
        if any(n < 0 for n in self.train_cycles_per_cell.values()):
            raise DataError("training counts must be non-negative")
        object.__setattr__(self, "train_cycles_per_cell", dict(self.train_cycles_per_cell))

    def with_downsampling(self, stride: int, phase: int) -> "Scenario":
        return Scenario(self.name, self.target_cell, self.train_cycles_per_cell, stride, phase)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "target_cell": self.target_cell,
            "train_cycles_per_cell": dict(self.train_cycles_per_cell),
            "downsample_stride": self.downsample_stride,
            "downsample_phase": self.downsample_phase,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scenario":
        try:
            return cls(
                name=str(d["name"]),
                target_cell=str(d["target_cell"]),
                train_cycles_per_cell={str(k): int(v) for k, v in d["train_cycles_per_cell"].items()},
                downsample_stride=int(d.get("downsample_stride", 3)),
                downsample_phase=int(d.get("downsample_phase", 0)),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise DataError(f"malformed scenario definition: {exc}") from None


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"scenario file is not valid JSON: {exc.msg}", exc.lineno) from None
    return Scenario.from_dict(d)


def _nasa(name: str, target: str) -> Scenario:
    counts = {c: (100 if c == target else 168) for c in ("B0005", "B0006", "B0007")}
    return Scenario(name, target, counts)


# Hide-the-tail splits on the NASA cells: the target keeps its first 100
# cycles, the other two their first 168.
BUILTIN_SCENARIOS: dict[str, Scenario] = {
    "a": _nasa("a", "B0005"),
    "b": _nasa("b", "B0006"),
    "c": _nasa("c", "B0007"),
}


@dataclass
class TrainingSet:
    """Observations of several cells, stacked cell by cell then by cycle."""

    cells: list[str]
    cycles: list[np.ndarray]
    capacities: list[np.ndarray]
    _stacked: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not (len(self.cells) == len(self.cycles) == len(self.capacities)):
            raise DataError("cells, cycles and capacities differ in length")
        if len(set(self.cells)) != len(self.cells):
            raise DataError("duplicate cell ids in training set")
        self.cycles = [np.asarray(c, dtype=np.float64) for c in self.cycles]
        self.capacities = [np.asarray(c, dtype=np.float64) for c in self.capacities]
        for cell, c, y in zip(self.cells, self.cycles, self.capacities):
            if c.shape != y.shape or c.ndim != 1:
                raise DataError(f"{cell}: cycles and capacities differ in length")
            if np.any(np.diff(c) <= 0):
                raise DataError(f"{cell}: cycles must be strictly increasing")
        idx = np.concatenate([np.full(len(c), i, dtype=np.intp) for i, c in enumerate(self.cycles)]) \
            if self.cells else np.zeros(0, dtype=np.intp)
        t = np.concatenate(self.cycles) if self.cells else np.zeros(0)
        y = np.concatenate(self.capacities) if self.cells else np.zeros(0)
        for a in (idx, t, y):
            a.setflags(write=False)
        self._stacked = (idx, t, y)

    @classmethod
    def from_series(cls, series: Iterable[CapacitySeries]) -> "TrainingSet":
        series = list(series)
        return cls([s.cell_id for s in series], [s.cycles for s in series],
                   [s.capacities for s in series])

    @property
    def m(self) -> int:
        return len(self.cells)

    @property
    def T(self) -> int:
        return self._stacked[0].size

    @property
    def cell_index(self) -> np.ndarray:
        return self._stacked[0]

    @property
    def t(self) -> np.ndarray:
        return self._stacked[1]

    @property
    def y(self) -> np.ndarray:
        return self._stacked[2]

    def index_of(self, cell: str) -> int:
        try:
            return self.cells.index(cell)
        except ValueError:
            raise UnknownCell(f"cell {cell!r} is not in the training set") from None

    def digest(self) -> str:
        """Stable hash of the stacked data, used to tie saved models to their data."""
        h = hashlib.sha256()
        for cell, c, y in zip(self.cells, self.cycles, self.capacities):
            h.update(cell.encode("utf-8") + b"\0")
            h.update(np.ascontiguousarray(c, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(y, dtype="<f8").tobytes())
        return h.hexdigest()


def build_scenario(series: Iterable[CapacitySeries], sc: Scenario):
    """
    Split series into a downsampled training set and full-resolution held-out data.

    Each scenario cell is truncated to its first ``train_cycles_per_cell``
    measurements and then downsampled; everything after the truncation point
    is held out without downsampling. Cells are ordered as in ``series``.

    Returns ``(TrainingSet, {cell_id: held-out CapacitySeries})``.
    """
    by_id = {s.cell_id: s for s in series}
    for cell in sc.train_cycles_per_cell:
        if cell not in by_id:
            raise UnknownCell(f"scenario {sc.name!r} needs cell {cell!r}, not present in data")
    train, held = [], {}
    for s in series:
        if s.cell_id not in sc.train_cycles_per_cell:
            continue
        n = sc.train_cycles_per_cell[s.cell_id]
        if n > len(s):
            raise TrainCountExceedsData(
                f"{s.cell_id}: scenario asks for {n} training cycles, only {len(s)} available"
            )
        train.append(downsample(s.head(n), sc.downsample_stride, sc.downsample_phase))
        held[s.cell_id] = s.tail(n)
    return TrainingSet.from_series(train), held


def default_nasa_csv() -> str | None:
    """Location of the NASA capacity CSV, from ``CELLGP_NASA_CSV`` or ``data/nasa_capacity.csv``."""
    env = os.environ.get("CELLGP_NASA_CSV")
    if env:
        return env
    here = os.path.dirname(os.path.abspath(__file__))
    for cand in (os.path.join(here, "..", "..", "data", "nasa_capacity.csv"),
                 os.path.join(os.getcwd(), "data", "nasa_capacity.csv")):
        if os.path.exists(cand):
            return os.path.normpath(cand)
    return None
