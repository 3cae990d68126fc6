"""Uniform grid archive over the behavior space.

The behavior space is divided into equally sized hyperrectangles (niches); each
occupied niche stores its elite, the best-objective solution seen for it.
Membership uses half-open intervals [lower, upper) per dimension, with values
outside the range clamped into the edge bins so every evaluation contributes.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationFault, UsageError
from .search_space import Configuration


@dataclass(frozen=True)
class ArchiveDim:
    """One behavior dimension: range [lower, upper) split into ``bins`` cells."""

    lower: float
    upper: float
    bins: int

    def __post_init__(self):
        if not self.lower < self.upper:
            raise UsageError(f"archive dim needs lower < upper, got [{self.lower}, {self.upper}]")
        if self.bins < 1:
            raise UsageError(f"archive dim needs bins >= 1, got {self.bins}")

    @property
    def width(self) -> float:
        return (self.upper - self.lower) / self.bins


@dataclass(frozen=True)
class ArchiveSpec:
    """Grid geometry: one ``ArchiveDim`` per feature function."""

    dims: tuple[ArchiveDim, ...]

    def __post_init__(self):
        if not self.dims:
            raise UsageError("archive spec needs at least one dimension")
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def k(self) -> int:
        """Total niche count (product of per-dimension bin counts)."""
        return math.prod(d.bins for d in self.dims)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @classmethod
    def of(cls, *dims: tuple[float, float, int]) -> "ArchiveSpec":
        return cls(tuple(ArchiveDim(lo, hi, bins) for lo, hi, bins in dims))


@dataclass
class Elite:
    """Best solution stored in one niche, self-contained for export."""

    genotype: np.ndarray
    configuration: Configuration
    objective: float
    features: np.ndarray
    eval_index: int


class InsertStatus(enum.Enum):
    NEW = "new_cell"
    IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass(frozen=True)
class InsertOutcome:
    """Result of one archive insertion; ``delta`` is meaningful for IMPROVED."""

    status: InsertStatus
    delta: float = 0.0

    @property
    def accepted(self) -> bool:
        return self.status is not InsertStatus.REJECTED


class GridArchive:
    """Mutable elite store over an ``ArchiveSpec`` grid.

    Mutated by a single run loop only; snapshots may be shared read-only.
    Besides the cell map it keeps per-elite genotype/objective arrays in
    insertion order, so emitters can sample parents without walking the dict.
    """

    def __init__(self, spec: ArchiveSpec):
        self.spec = spec
        self.cells: dict[tuple[int, ...], Elite] = {}
        self._lo = np.array([d.lower for d in spec.dims])
        self._width = np.array([d.width for d in spec.dims])
        self._bins = tuple(d.bins for d in spec.dims)
        # Parallel arrays over occupied cells, in first-insertion order.
        self._cell_pos: dict[tuple[int, ...], int] = {}
        self._genotypes: np.ndarray | None = None
        self._objectives = np.empty(spec.k, dtype=float)

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def occupied(self) -> int:
        return len(self.cells)

    def __len__(self):
        return len(self.cells)

    def bin_index(self, features) -> tuple[int, ...]:
        """Map a feature vector to its niche's bin tuple.

        Values at or above the upper boundary, or below the lower one, are
        clamped into the edge bin.
        """
        if len(features) != len(self._bins):
            raise UsageError(
                f"feature vector has {len(features)} dims, archive has {len(self._bins)}"
            )
        out = []
        for y, lo, w, b in zip(features, self._lo, self._width, self._bins):
            y = float(y)
            if math.isnan(y):
                raise EvaluationFault("NaN feature value cannot be binned")
            i = int(math.floor((y - lo) / w))
            if i < 0:
                i = 0
            elif i >= b:
                i = b - 1
            out.append(i)
        return tuple(out)

    def insert(self, candidate: Elite) -> InsertOutcome:
        """Store the candidate if its niche is empty or it strictly improves it.

        Ties keep the incumbent. The archive is untouched on REJECTED.
        """
        obj = float(candidate.objective)
        if not math.isfinite(obj):
            raise EvaluationFault(f"non-finite objective {candidate.objective!r}")
        key = self.bin_index(candidate.features)
        incumbent = self.cells.get(key)
        if incumbent is None:
            self.cells[key] = candidate
            pos = len(self._cell_pos)
            self._cell_pos[key] = pos
            if self._genotypes is None:
                self._genotypes = np.empty((self.spec.k, len(candidate.genotype)))
            self._genotypes[pos] = candidate.genotype
            self._objectives[pos] = obj
            return InsertOutcome(InsertStatus.NEW)
        if obj > incumbent.objective:
            delta = obj - incumbent.objective
            self.cells[key] = candidate
            pos = self._cell_pos[key]
            self._genotypes[pos] = candidate.genotype
            self._objectives[pos] = obj
            return InsertOutcome(InsertStatus.IMPROVED, delta)
        return InsertOutcome(InsertStatus.REJECTED)

    def summary(self) -> tuple[float, float, float | None]:
        """(coverage fraction, QD-Score, best objective or None when empty)."""
        n = len(self.cells)
        if n == 0:
            return 0.0, 0.0, None
        objs = self._objectives[:n]
        return n / self.k, float(np.sum(objs)), float(np.max(objs))

    def elite_genotypes(self) -> np.ndarray:
        """(occupied, d) view of elite genotypes in first-insertion order."""
        if self._genotypes is None:
            return np.empty((0, 0))
        return self._genotypes[: len(self.cells)]

    def random_elite(self, rng: np.random.Generator) -> Elite:
        if not self.cells:
            raise UsageError("archive is empty")
        keys = list(self.cells.keys())
        return self.cells[keys[rng.integers(len(keys))]]


# -- CSV export ---------------------------------------------------------------
#
# Header: bin_0,..,bin_{m-2},feat_0,..,feat_{m-2},objective,eval_index,
#         g_0,..,g_{d-1},<param names...>; one row per occupied cell, sorted
# lexicographically by bin tuple; floats at full round-trip precision.


def archive_csv_header(archive: GridArchive, param_names) -> list[str]:
    nb = archive.spec.ndim
    d = len(param_names)  # genotype dimension equals the parameter count
    return (
        [f"bin_{i}" for i in range(nb)]
        + [f"feat_{i}" for i in range(nb)]
        + ["objective", "eval_index"]
        + [f"g_{i}" for i in range(d)]
        + list(param_names)
    )


def write_archive_csv(archive: GridArchive, param_names, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(archive_csv_header(archive, param_names))
        for key in sorted(archive.cells.keys()):
            elite = archive.cells[key]
            row = (
                [str(i) for i in key]
                + [repr(float(f)) for f in elite.features]
                + [repr(float(elite.objective)), str(elite.eval_index)]
                + [repr(float(g)) for g in elite.genotype]
                + [repr(float(elite.configuration[name])) for name in param_names]
            )
            writer.writerow(row)


def read_archive_csv(path) -> list[dict]:
    """Read rows written by ``write_archive_csv`` back into plain dicts.

    Returns one dict per row with keys ``bins`` (tuple), ``features``,
    ``objective``, ``eval_index``, ``genotype`` and ``params`` (name -> value).
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise UsageError(f"empty archive CSV {path}")
        nb = sum(1 for c in header if c.startswith("bin_"))
        d = sum(1 for c in header if c.startswith("g_"))
        param_names = header[2 * nb + 2 + d :]
        rows = []
        for row in reader:
            bins = tuple(int(v) for v in row[:nb])
            feats = np.array([float(v) for v in row[nb : 2 * nb]])
            objective = float(row[2 * nb])
            eval_index = int(row[2 * nb + 1])
            geno = np.array([float(v) for v in row[2 * nb + 2 : 2 * nb + 2 + d]])
            params = {
                name: float(v)
                for name, v in zip(param_names, row[2 * nb + 2 + d :])
            }
            rows.append(
                {
                    "bins": bins,
                    "features": feats,
                    "objective": objective,
                    "eval_index": eval_index,
                    "genotype": geno,
                    "params": params,
                }
            )
        return rows
