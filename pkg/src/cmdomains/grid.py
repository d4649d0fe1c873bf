"""Uniform cell grids, domain masks, exact distance transforms and digital connectivity.

A point of the continuum picture is a cell center; a domain is the union of
the centers of its true cells; distance to the boundary is the Euclidean
distance to the nearest false cell center.  Distances are carried both in
length units and as exact squared integers in cell units, so every comparison
that matters for a verdict can be made without rounding drift.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import ndimage

from .errors import EmptyDomain, EmptySet, GridMismatch, InvalidGrid, MarginViolation

FACE = "face"
FACE_VERTEX = "face+vertex"
ADJACENCIES = (FACE, FACE_VERTEX)

Cell = Union[int, Sequence[int]]


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box of ``prod(cells_per_axis)`` square cells of side ``spacing``.

    ``origin`` is the coordinate of the center of cell ``(0, ..., 0)``.
    """

    cells_per_axis: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...] = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.cells_per_axis)
        if len(shape) < 2:
            raise InvalidGrid(f"need at least 2 axes, got {len(shape)}")
        if min(shape) < 4:
            raise InvalidGrid(f"every axis needs at least 4 cells, got {shape}")
        total = 1
        for n in shape:
            total *= n
        if total > sys.maxsize:
            raise InvalidGrid(f"grid of {total} cells exceeds the addressable range")
        spacing = float(self.spacing)
        if not (np.isfinite(spacing) and spacing > 0):
            raise InvalidGrid(f"spacing must be positive and finite, got {self.spacing!r}")
        origin = self.origin
        if origin is None:
            origin = (0.5 * spacing,) * len(shape)
        origin = tuple(float(o) for o in origin)
        if len(origin) != len(shape):
            raise InvalidGrid(f"origin has {len(origin)} coordinates for a {len(shape)}-D grid")
        if not all(np.isfinite(origin)):
            raise InvalidGrid("origin must be finite")
        object.__setattr__(self, "cells_per_axis", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], spacing: float) -> "GridSpec":
        """Smallest grid with spacing ``spacing`` whose cell centers cover ``[lower, upper]``.

        The box is centered on the requested interval along each axis.
        """
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        counts = np.ceil((upper - lower) / spacing - 1e-9).astype(int) + 1
        mid = 0.5 * (lower + upper)
        origin = mid - 0.5 * (counts - 1) * spacing
        return cls(tuple(int(c) for c in counts), spacing, tuple(origin))

    @property
    def dim_count(self) -> int:
        return len(self.cells_per_axis)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    @property
    def size(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim_count

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(self.cells_per_axis, self.spacing * factor,
                        tuple(o * factor for o in self.origin))

    def axes(self) -> list[np.ndarray]:
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.cells_per_axis)]

    def mesh(self) -> list[np.ndarray]:
        """Cell-center coordinates, one array of grid shape per axis."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def flat(self, cell: Cell) -> int:
        if isinstance(cell, (int, np.integer)):
            idx = int(cell)
            if not 0 <= idx < self.size:
                raise IndexError(f"cell index {idx} out of range")
            return idx
        cell = tuple(int(c) for c in cell)
        if len(cell) != self.dim_count or any(not 0 <= c < n for c, n in zip(cell, self.shape)):
            raise IndexError(f"cell {cell} out of range for grid {self.shape}")
        return int(np.ravel_multi_index(cell, self.shape))

    def cell(self, flat: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(int(flat), self.shape))

    def center(self, cell: Cell) -> np.ndarray:
        idx = np.array(self.cell(self.flat(cell)), float)
        return np.asarray(self.origin) + self.spacing * idx

    def nearest_cell(self, point: Sequence[float]) -> tuple[int, ...]:
        idx = np.rint((np.asarray(point, float) - np.asarray(self.origin)) / self.spacing)
        idx = np.clip(idx.astype(int), 0, np.asarray(self.shape) - 1)
        return tuple(int(i) for i in idx)

    def margin(self) -> np.ndarray:
        """Boolean field marking the outermost one-cell ring."""
        ring = np.zeros(self.shape, bool)
        for axis in range(self.dim_count):
            sl = [slice(None)] * self.dim_count
            sl[axis] = 0
            ring[tuple(sl)] = True
            sl[axis] = -1
            ring[tuple(sl)] = True
        return ring


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


def same_grid(*objs) -> GridSpec:
    grid = objs[0].grid
    for obj in objs[1:]:
        if obj.grid != grid:
            raise GridMismatch(f"grids differ: {grid} vs {obj.grid}")
    return grid


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Boolean cell field; ``True`` where the cell center lies in the open set.

    Construction rejects any true cell on the margin ring (compact containment).
    """

    grid: GridSpec
    inside: np.ndarray

    def __post_init__(self):
        inside = np.asarray(self.inside)
        if inside.shape != self.grid.shape:
            raise InvalidGrid(f"mask shape {inside.shape} does not match grid {self.grid.shape}")
        inside = inside.astype(bool)
        bad = np.flatnonzero((inside & self.grid.margin()).ravel())
        if bad.size:
            raise MarginViolation(self.grid.cell(bad[0]))
        object.__setattr__(self, "inside", _frozen(inside))

    @classmethod
    def from_predicate(cls, grid: GridSpec, predicate, clip: bool = False) -> "DomainMask":
        """Rasterize ``predicate(*coords) -> bool array`` on cell centers.

        With ``clip=True`` margin cells are forced false instead of raising.
        """
        inside = np.asarray(predicate(*grid.mesh()), bool)
        if clip:
            inside = inside & ~grid.margin()
        return cls(grid, inside)

    @classmethod
    def empty(cls, grid: GridSpec) -> "DomainMask":
        return cls(grid, np.zeros(grid.shape, bool))

    @classmethod
    def full(cls, grid: GridSpec) -> "DomainMask":
        """Every cell except the margin ring."""
        return cls(grid, ~grid.margin())

    def __eq__(self, other):
        if not isinstance(other, DomainMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.inside, other.inside)

    def __hash__(self):
        return hash((self.grid, self.inside.tobytes()))

    def __contains__(self, cell) -> bool:
        return bool(self.inside.ravel()[self.grid.flat(cell)])

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    def is_empty(self) -> bool:
        return not self.inside.any()

    def cells(self) -> np.ndarray:
        """Flat indices of true cells, ascending."""
        return np.flatnonzero(self.inside.ravel())

    def replace(self, inside: np.ndarray) -> "DomainMask":
        return DomainMask(self.grid, inside)


@dataclass(frozen=True, eq=False)
class CompactSet:
    """Nonempty finite set of cells, stored as sorted unique flat indices."""

    grid: GridSpec
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim == 2:
            cells = np.array([self.grid.flat(c) for c in cells], dtype=np.int64)
        cells = np.unique(cells.astype(np.int64).ravel())
        if cells.size == 0:
            raise EmptySet("a compact set needs at least one cell")
        if cells[0] < 0 or cells[-1] >= self.grid.size:
            raise IndexError("cell index out of range")
        object.__setattr__(self, "cells", _frozen(cells))

    @classmethod
    def from_cells(cls, grid: GridSpec, cells: Iterable[Cell]) -> "CompactSet":
        return cls(grid, np.array([grid.flat(c) for c in cells], dtype=np.int64))

    @classmethod
    def from_indicator(cls, grid: GridSpec, indicator: np.ndarray) -> "CompactSet":
        return cls(grid, np.flatnonzero(np.asarray(indicator, bool).ravel()))

    def __eq__(self, other):
        if not isinstance(other, CompactSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.grid, self.cells.tobytes()))

    def __len__(self) -> int:
        return int(self.cells.size)

    def __contains__(self, cell) -> bool:
        idx = self.grid.flat(cell)
        pos = np.searchsorted(self.cells, idx)
        return bool(pos < self.cells.size and self.cells[pos] == idx)

    def indicator(self) -> np.ndarray:
        out = np.zeros(self.grid.size, bool)
        out[self.cells] = True
        return out.reshape(self.grid.shape)

    def coords(self) -> np.ndarray:
        """Integer cell coordinates, shape ``(len(self), k)``."""
        return np.stack(np.unravel_index(self.cells, self.grid.shape), axis=1)

    def issubset(self, other: "CompactSet") -> bool:
        same_grid(self, other)
        return bool(np.isin(self.cells, other.cells, assume_unique=True).all())


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Distance to the nearest false cell center.

    ``sq`` holds the exact squared distance in cell units; ``value`` is
    ``spacing * sqrt(sq)``.
    """

    grid: GridSpec
    sq: np.ndarray
    value: np.ndarray = field(init=False)

    def __post_init__(self):
        sq = np.asarray(self.sq, dtype=np.int64)
        object.__setattr__(self, "sq", _frozen(sq))
        object.__setattr__(self, "value", _frozen(self.grid.spacing * np.sqrt(sq)))

    @property
    def cells_units(self) -> np.ndarray:
        return np.sqrt(self.sq)

    def at(self, cell: Cell) -> float:
        return float(self.value.ravel()[self.grid.flat(cell)])


def nearest_feature_sq(feature: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact squared distance (cell units) from every cell to the nearest ``True`` cell.

    Returns ``(sq, nearest)`` where ``nearest`` holds the flat index of one
    nearest feature cell.  If ``feature`` is all false, ``sq`` is all zero and
    ``nearest`` is the identity.
    """
    feature = np.asarray(feature, bool)
    if not feature.any():
        return np.zeros(feature.shape, np.int64), np.arange(feature.size).reshape(feature.shape)
    # scipy's transform is exact (Voronoi-based); recompute integer squares from
    # the returned feature indices so callers never see rounding.
    idx = ndimage.distance_transform_edt(~feature, return_distances=False, return_indices=True)
    own = np.indices(feature.shape)
    sq = ((idx.astype(np.int64) - own) ** 2).sum(axis=0)
    nearest = np.ravel_multi_index(tuple(idx), feature.shape)
    return sq, nearest


def edt(mask: DomainMask) -> DistanceField:
    """Exact Euclidean distance from every cell center to the nearest false cell center."""
    sq, _ = nearest_feature_sq(~mask.inside)
    return DistanceField(mask.grid, sq)


def erode(mask: DomainMask, r: float, dist: DistanceField | None = None) -> DomainMask:
    """Cells whose distance to the complement is at least ``r``."""
    if not r > 0:
        raise ValueError(f"erosion radius must be positive, got {r!r}")
    if dist is None:
        dist = edt(mask)
    return DomainMask(mask.grid, dist.value >= r)


def structure(dim_count: int, adjacency: str) -> np.ndarray:
    if adjacency == FACE:
        return ndimage.generate_binary_structure(dim_count, 1)
    if adjacency == FACE_VERTEX:
        return ndimage.generate_binary_structure(dim_count, dim_count)
    raise ValueError(f"unknown adjacency {adjacency!r}; expected one of {ADJACENCIES}")


def neighbor_offsets(dim_count: int, adjacency: str) -> list[tuple[int, ...]]:
    """Nonzero offsets of the adjacency stencil, in lexicographic order."""
    st = structure(dim_count, adjacency)
    return [tuple(int(v) - 1 for v in off)
            for off in itertools.product(range(3), repeat=dim_count)
            if st[off] and any(v != 1 for v in off)]


def connected_components(obj: CompactSet | DomainMask | np.ndarray, adjacency: str = FACE_VERTEX,
                         grid: GridSpec | None = None) -> tuple[np.ndarray, int]:
    """Label connected components of a cell set.

    Returns ``(labels, count)``; ``labels`` has grid shape, ``-1`` off the set,
    and dense ids from 0 ordered by the smallest flat index in each component.
    """
    if isinstance(obj, DomainMask):
        indicator = obj.inside
    elif isinstance(obj, CompactSet):
        indicator = obj.indicator()
    else:
        indicator = np.asarray(obj, bool)
    labels, count = ndimage.label(indicator, structure=structure(indicator.ndim, adjacency))
    # ndimage.label numbers components in raster order of first appearance,
    # which is the smallest flat index.
    return labels.astype(np.int64) - 1, int(count)


def boundary_cells(mask: DomainMask) -> CompactSet:
    """False cells sharing a face with at least one true cell."""
    if mask.is_empty():
        raise EmptyDomain("mask has no true cell")
    grown = ndimage.binary_dilation(mask.inside, structure=structure(mask.grid.dim_count, FACE))
    return CompactSet.from_indicator(mask.grid, grown & ~mask.inside)


def closed_complement(mask: DomainMask) -> CompactSet:
    """All false cells (the closed box minus the open set)."""
    return CompactSet.from_indicator(mask.grid, ~mask.inside)


def dilate(indicator: np.ndarray, adjacency: str = FACE_VERTEX, iterations: int = 1) -> np.ndarray:
    indicator = np.asarray(indicator, bool)
    return ndimage.binary_dilation(indicator, structure=structure(indicator.ndim, adjacency),
                                   iterations=iterations)
