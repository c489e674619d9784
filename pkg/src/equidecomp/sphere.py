"""Equal-area cell partition of the 2-sphere and cell-mask measurable sets.

Every cell has measure exactly ``1/N``, so the normalized surface measure of
a cell mask is an integer count times ``1/N`` and measure identities can be
checked as integer arithmetic.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import PartitionMismatch
from .rotations import Rotation, UnitVector, rotate_points


class SpherePartition:
    """Latitude bands of varying height, each cut into cells of equal
    azimuthal extent; the two polar caps are single cells.

    Band heights are derived from the cell counts so that every cell has
    area 1/N.  The construction is mirror-symmetric under z -> -z.
    Cells are numbered band by band from the north pole, eastward from
    longitude 0 within a band.
    """

    scheme = "equal-area-bands"

    def __init__(self, n_cells_target: int):
        if n_cells_target < 8:
            raise ValueError("n_cells_target must be at least 8")
        self.n_cells_target = int(n_cells_target)
        counts = _band_counts(self.n_cells_target)
        n = int(counts.sum())
        nb = len(counts)
        cum = np.concatenate([[0], np.cumsum(counts)])
        # z of the band boundaries, north to south; the southern half mirrors
        # the northern one exactly
        z = 1.0 - 2.0 * cum / n
        for b in range(nb + 1):
            if b == nb - b:
                z[b] = 0.0
            elif b > nb - b:
                z[b] = -z[nb - b]
        z[0], z[-1] = 1.0, -1.0
        self.n_cells = n
        self.cell_measure = 1.0 / n
        self.band_counts = counts
        self.band_offsets = cum
        self.z_edges = z
        self.centers = self._build_centers()
        self.centers.setflags(write=False)

    @property
    def spec(self) -> dict:
        return {"scheme": self.scheme, "n_cells_target": self.n_cells_target}

    @property
    def n_bands(self) -> int:
        return len(self.band_counts)

    def _build_centers(self) -> np.ndarray:
        out = np.empty((self.n_cells, 3))
        for b, count in enumerate(self.band_counts):
            lo, hi = self.band_offsets[b], self.band_offsets[b + 1]
            if count == 1 and b in (0, self.n_bands - 1):
                out[lo] = (0.0, 0.0, 1.0 if b == 0 else -1.0)
                continue
            zc = 0.5 * (self.z_edges[b] + self.z_edges[b + 1])
            r = math.sqrt(max(0.0, 1.0 - zc * zc))
            phi = (np.arange(count) + 0.5) * (2.0 * math.pi / count)
            out[lo:hi, 0] = r * np.cos(phi)
            out[lo:hi, 1] = r * np.sin(phi)
            out[lo:hi, 2] = zc
        return out

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Index of the cell containing each point (rows of an (n, 3) array)."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        z = np.clip(points[:, 2], -1.0, 1.0)
        band = np.searchsorted(-self.z_edges, -z, side="right") - 1
        band = np.clip(band, 0, self.n_bands - 1)
        phi = np.arctan2(points[:, 1], points[:, 0])
        phi = np.where(phi < 0.0, phi + 2.0 * math.pi, phi)
        counts = self.band_counts[band]
        k = np.minimum((phi * (counts / (2.0 * math.pi))).astype(np.int64), counts - 1)
        return self.band_offsets[band] + k

    def cell_areas(self) -> np.ndarray:
        """Normalized area of every cell, recomputed from the band geometry."""
        heights = self.z_edges[:-1] - self.z_edges[1:]
        return np.repeat(heights / (2.0 * self.band_counts), self.band_counts)

    def __repr__(self):
        return f"SpherePartition(N={self.n_cells}, bands={self.n_bands})"


def _band_counts(target: int) -> np.ndarray:
    theta_cap = math.acos(1.0 - 2.0 / target)
    side = math.sqrt(4.0 * math.pi / target)
    n_collars = max(1, int(round((math.pi - 2.0 * theta_cap) / side)))
    edges = np.linspace(theta_cap, math.pi - theta_cap, n_collars + 1)
    ideal = target * (np.cos(edges[:-1]) - np.cos(edges[1:])) / 2.0
    half = n_collars // 2
    north = np.maximum(1, np.rint(ideal[:half])).astype(np.int64)
    middle = (
        np.maximum(1, np.rint(ideal[half : half + 1])).astype(np.int64)
        if n_collars % 2
        else np.zeros(0, dtype=np.int64)
    )
    return np.concatenate([[1], north, middle, north[::-1], [1]]).astype(np.int64)


@functools.lru_cache(maxsize=8)
def equal_area_partition(n_cells_target: int) -> SpherePartition:
    return SpherePartition(n_cells_target)


class SyntheticSpace:
    """A finite vertex set where every vertex carries measure 1/n_cells."""

    scheme = "synthetic"

    def __init__(self, n_cells: int):
        if n_cells < 1:
            raise ValueError("n_cells must be positive")
        self.n_cells = int(n_cells)
        self.cell_measure = 1.0 / self.n_cells

    @property
    def spec(self) -> dict:
        return {"scheme": self.scheme, "n_cells": self.n_cells}

    def __repr__(self):
        return f"SyntheticSpace(n={self.n_cells})"


def space_from_spec(spec: dict):
    scheme = spec.get("scheme")
    if scheme == SpherePartition.scheme:
        return equal_area_partition(int(spec["n_cells_target"]))
    if scheme == SyntheticSpace.scheme:
        return SyntheticSpace(int(spec["n_cells"]))
    raise ValueError(f"unknown space scheme {scheme!r}")


def _same_space(a, b) -> bool:
    return a is b or (a.spec == b.spec and a.n_cells == b.n_cells)


@dataclass(frozen=True, eq=False)
class MeasurableSet:
    """A union of cells of ``space``, stored as a boolean mask."""

    space: object
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.space.n_cells,):
            raise ValueError(f"mask has shape {m.shape}, expected ({self.space.n_cells},)")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def empty(cls, space) -> "MeasurableSet":
        return cls(space, np.zeros(space.n_cells, dtype=bool))

    @classmethod
    def full(cls, space) -> "MeasurableSet":
        return cls(space, np.ones(space.n_cells, dtype=bool))

    @classmethod
    def from_indices(cls, space, indices) -> "MeasurableSet":
        m = np.zeros(space.n_cells, dtype=bool)
        m[np.asarray(indices, dtype=np.int64)] = True
        return cls(space, m)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def measure(self) -> float:
        return self.count * self.space.cell_measure

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def _check(self, other: "MeasurableSet"):
        if not _same_space(self.space, other.space):
            raise PartitionMismatch(f"{self.space!r} vs {other.space!r}")

    def __or__(self, other):
        self._check(other)
        return MeasurableSet(self.space, self.mask | other.mask)

    def __and__(self, other):
        self._check(other)
        return MeasurableSet(self.space, self.mask & other.mask)

    def __sub__(self, other):
        self._check(other)
        return MeasurableSet(self.space, self.mask & ~other.mask)

    def __eq__(self, other):
        if not isinstance(other, MeasurableSet):
            return NotImplemented
        return _same_space(self.space, other.space) and bool(np.array_equal(self.mask, other.mask))

    __hash__ = None

    def issubset(self, other: "MeasurableSet") -> bool:
        self._check(other)
        return not (self.mask & ~other.mask).any()

    def isdisjoint(self, other: "MeasurableSet") -> bool:
        self._check(other)
        return not (self.mask & other.mask).any()

    def to_rle(self) -> list[list[int]]:
        """Runs ``[start, length]`` of member cells."""
        m = np.concatenate([[False], self.mask, [False]]).astype(np.int8)
        d = np.diff(m)
        starts = np.flatnonzero(d == 1)
        ends = np.flatnonzero(d == -1)
        return [[int(s), int(e - s)] for s, e in zip(starts, ends)]

    @classmethod
    def from_rle(cls, space, runs) -> "MeasurableSet":
        m = np.zeros(space.n_cells, dtype=bool)
        for start, length in runs:
            if start < 0 or length < 0 or start + length > space.n_cells:
                raise ValueError(f"run {start}+{length} outside the space")
            m[start : start + length] = True
        return cls(space, m)

    def to_json(self) -> dict:
        return {"space": self.space.spec, "runs": self.to_rle()}

    @classmethod
    def from_json(cls, doc: dict, space=None) -> "MeasurableSet":
        sp = space_from_spec(doc["space"]) if space is None else space
        if space is not None and space.spec != doc["space"]:
            raise PartitionMismatch("set was saved on a different space")
        return cls.from_rle(sp, doc["runs"])

    def __repr__(self):
        return f"MeasurableSet(count={self.count}, measure={self.measure:.6g})"


def union(*sets: MeasurableSet) -> MeasurableSet:
    out = sets[0]
    for s in sets[1:]:
        out = out | s
    return out


def intersect(*sets: MeasurableSet) -> MeasurableSet:
    out = sets[0]
    for s in sets[1:]:
        out = out & s
    return out


def subtract(a: MeasurableSet, b: MeasurableSet) -> MeasurableSet:
    return a - b


def measure(s: MeasurableSet) -> float:
    return s.measure


def cap_radius(measure_: float) -> float:
    """Angular radius of a spherical cap of the given normalized measure."""
    return math.acos(min(1.0, max(-1.0, 1.0 - 2.0 * measure_)))


def set_from_cap(center: UnitVector, radius: float, partition: SpherePartition) -> MeasurableSet:
    """Cells whose centers lie within spherical distance ``radius`` of ``center``."""
    if not 0.0 <= radius <= math.pi:
        raise ValueError("radius must lie in [0, pi]")
    dots = partition.centers @ center.as_array()
    dist = np.arccos(np.clip(dots, -1.0, 1.0))
    return MeasurableSet(partition, dist <= radius)


def cell_map(r: Rotation, partition: SpherePartition, cells=None) -> np.ndarray:
    """Cell containing the image of each cell center under ``r``."""
    centers = partition.centers if cells is None else partition.centers[np.asarray(cells)]
    return partition.locate(rotate_points(r, centers))


def cell_maps(rotations, partition: SpherePartition, cells=None) -> np.ndarray:
    """Stacked :func:`cell_map` rows, one per rotation, as int32."""
    n = partition.n_cells if cells is None else len(cells)
    out = np.empty((len(rotations), n), dtype=np.int32)
    for k, r in enumerate(rotations):
        out[k] = cell_map(r, partition, cells)
    return out


def transport(r: Rotation, U: MeasurableSet) -> tuple[MeasurableSet, float]:
    """Image of U under r by nearest-cell transport of cell centers.

    Returns the image and its distortion ``|mu(image) - mu(U)|``; distinct
    cells whose centers land in the same cell merge, so the image never
    outweighs U.
    """
    image = MeasurableSet.from_indices(U.space, cell_map(r, U.space, U.indices))
    return image, abs(image.measure - U.measure)


def random_caps(partition: SpherePartition, count: int, rng: np.random.Generator,
                min_measure: float | None = None, max_measure: float = 0.5) -> list[MeasurableSet]:
    """Caps with uniformly random centers and log-uniform measures between
    one cell and ``max_measure``."""
    lo = partition.cell_measure if min_measure is None else min_measure
    out = []
    for _ in range(count):
        v = rng.normal(size=3)
        m = math.exp(rng.uniform(math.log(lo), math.log(max_measure)))
        out.append(set_from_cap(UnitVector.from_array(v), cap_radius(m), partition))
    return out
