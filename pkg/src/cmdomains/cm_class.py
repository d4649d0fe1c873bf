"""Decide the tube-connectivity property and membership in the domain class.

A domain has the property for a factor ``M > 1`` when any two of its points
``x, y`` can be joined by a connected set whose ``d/M``-neighbourhood stays
inside the domain, ``d`` being the smaller of the two boundary distances.  On a
grid the admissible joining sets at tube radius ``r`` are exactly the
connected subsets of the erosion ``E_r = {edt >= r}``, and ``d`` is always an
EDT value, so the decision reduces to a sweep over the finitely many distinct
EDT levels with incremental union-find.

Level comparisons are made in cell units (``sqrt`` of exact squared integers),
which makes every verdict independent of the grid spacing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (EmptyDomain, InvalidParams, NotConnected, NotTubeConnected, OutsideDomain,
                     RepairFailed)
from .grid import (FACE_VERTEX, Cell, CompactSet, DistanceField, DomainMask, connected_components,
                   edt, nearest_feature_sq, neighbor_offsets)


@dataclass(frozen=True)
class ClassParams:
    """Tube shrink factor ``M > 1``, inner-ball radius ``R`` and an optional seed cell."""

    M: float
    R: float
    seed_hint: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not (np.isfinite(self.M) and self.M > 1):
            raise InvalidParams(f"M must be a finite number > 1, got {self.M!r}")
        if not (np.isfinite(self.R) and self.R > 0):
            raise InvalidParams(f"R must be positive, got {self.R!r}")
        object.__setattr__(self, "M", float(self.M))
        object.__setattr__(self, "R", float(self.R))
        if self.seed_hint is not None:
            object.__setattr__(self, "seed_hint", tuple(int(c) for c in self.seed_hint))

    def validate_for(self, grid) -> None:
        if self.R < 2 * grid.spacing:
            raise InvalidParams(f"R={self.R!r} is below two cells (h={grid.spacing!r})")


@dataclass(frozen=True)
class TubeWitness:
    pair: tuple[tuple[int, ...], tuple[int, ...]]
    d_star: float
    radius: float
    k_set: CompactSet

    def path(self) -> list[tuple[int, ...]]:
        return [self.k_set.grid.cell(c) for c in self._order]

    _order: tuple[int, ...] = field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class FailingPair:
    """A pair of cells not joined by any admissible tube.

    ``level`` is the smaller boundary distance of the pair and ``tube`` the
    required radius ``level / M``; the component ids refer to the labeling of
    ``erode(omega, tube)``.
    """

    x: tuple[int, ...]
    y: tuple[int, ...]
    level: float
    tube: float
    component_x: int
    component_y: int

    def to_dict(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "level": self.level, "tube": self.tube,
                "component_x": self.component_x, "component_y": self.component_y}


@dataclass(frozen=True)
class MembershipReport:
    nonempty: bool
    connected: bool
    compactly_contained: bool
    inner_ball: Optional[tuple[tuple[int, ...], float]]
    cm_holds: Optional[bool]
    failing_pair: Optional[FailingPair] = None
    witnesses: Optional[list] = None

    @property
    def member(self) -> bool:
        return bool(self.nonempty and self.connected and self.compactly_contained
                    and self.inner_ball is not None and self.cm_holds)

    def to_dict(self) -> dict:
        ball = None
        if self.inner_ball is not None:
            ball = {"center": list(self.inner_ball[0]), "radius": self.inner_ball[1]}
        return {
            "member": self.member,
            "nonempty": self.nonempty,
            "connected": self.connected,
            "compactly_contained": self.compactly_contained,
            "inner_ball": ball,
            "cm_holds": self.cm_holds,
            "failing_pair": None if self.failing_pair is None else self.failing_pair.to_dict(),
            "witnesses": None if self.witnesses is None else [
                {"pair": [list(w.pair[0]), list(w.pair[1])], "d_star": w.d_star,
                 "radius": w.radius, "path": [list(c) for c in w.path()]}
                for w in self.witnesses],
        }


class _UnionFind:
    """Disjoint sets over flat cell indices with a per-root count of marked cells."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.marks = [0] * n
        self.marked_roots = 0

    def find(self, a):
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.marks[ra] and self.marks[rb]:
            self.marked_roots -= 1
        self.marks[ra] += self.marks[rb]

    def mark(self, a):
        r = self.find(a)
        if not self.marks[r]:
            self.marked_roots += 1
        self.marks[r] += 1


def _flat_offsets(grid, adjacency=FACE_VERTEX) -> list[int]:
    strides = np.cumprod((grid.shape[1:] + (1,))[::-1])[::-1]
    return [int(np.dot(off, strides)) for off in neighbor_offsets(grid.dim_count, adjacency)]


def _descending(dist: DistanceField, cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cells sorted by squared distance descending, then by index; with their sq values."""
    sq = dist.sq.ravel()[cells]
    order = np.lexsort((cells, -sq))
    return cells[order], sq[order]


def _as_flat(omega: DomainMask, cell: Cell) -> int:
    idx = omega.grid.flat(cell)
    if not omega.inside.ravel()[idx]:
        raise OutsideDomain(f"cell {omega.grid.cell(idx)} is not inside the domain")
    return idx


def max_tube_radius(omega: DomainMask, x: Cell, y: Cell, dist: DistanceField | None = None) -> float:
    """Largest EDT level ``r`` at which ``x`` and ``y`` share a component of ``erode(omega, r)``.

    Returns 0 if no positive level joins them.
    """
    xi, yi = _as_flat(omega, x), _as_flat(omega, y)
    dist = edt(omega) if dist is None else dist
    if xi == yi:
        return float(dist.value.ravel()[xi])
    cells, sq = _descending(dist, omega.cells())
    cells, sq = cells.tolist(), sq.tolist()
    offsets = _flat_offsets(omega.grid)
    inserted = bytearray(omega.grid.size)
    uf = _UnionFind(omega.grid.size)
    i, n = 0, len(cells)
    while i < n:
        level = sq[i]
        while i < n and sq[i] == level:
            c = cells[i]
            inserted[c] = True
            for off in offsets:
                if inserted[c + off]:
                    uf.union(c, c + off)
            i += 1
        if inserted[xi] and inserted[yi] and uf.find(xi) == uf.find(yi):
            return omega.grid.spacing * float(np.sqrt(level))
    return 0.0


def _require_domain(omega: DomainMask) -> None:
    if omega.is_empty():
        raise EmptyDomain("mask has no true cell")
    _, count = connected_components(omega, FACE_VERTEX)
    if count != 1:
        raise NotConnected(f"mask has {count} components")


def _sweep(omega: DomainMask, M: float, dist: DistanceField):
    """Run the level sweep; return ``None`` or ``(sq_level, x, y, tube_cells)`` on failure."""
    cells, sq = _descending(dist, omega.cells())
    root = np.sqrt(sq.astype(float)).tolist()
    cells, sq = cells.tolist(), sq.tolist()
    offsets = _flat_offsets(omega.grid)
    inserted = bytearray(omega.grid.size)
    uf = _UnionFind(omega.grid.size)
    n = len(cells)
    ins = 0     # next cell to insert into the erosion
    mk = 0      # next cell to mark as part of the level set
    while mk < n:
        level_sq = sq[mk]
        tube = root[mk] / M
        while ins < n and root[ins] >= tube:
            c = cells[ins]
            inserted[c] = True
            for off in offsets:
                if inserted[c + off]:
                    uf.union(c, c + off)
            ins += 1
        while mk < n and sq[mk] == level_sq:
            uf.mark(cells[mk])
            mk += 1
        if uf.marked_roots != 1:
            # the top cell is in every level set, so a cell split from it
            # must have entered at this level
            x = cells[0]
            rx = uf.find(x)
            y = next(c for c in cells[:mk] if uf.find(c) != rx)
            return level_sq, x, y, tube
    return None


def check_cm(omega: DomainMask, M: float, dist: DistanceField | None = None
             ) -> tuple[bool, Optional[FailingPair]]:
    """Decide the tube property for factor ``M`` by a descending level sweep.

    Returns ``(True, None)`` or ``(False, pair)`` where ``pair`` is a failing
    pair found at the highest failing level.
    """
    if not M > 1:
        raise InvalidParams(f"M must exceed 1, got {M!r}")
    _require_domain(omega)
    dist = edt(omega) if dist is None else dist
    found = _sweep(omega, M, dist)
    if found is None:
        return True, None
    level_sq, x, y, tube_cells = found
    grid = omega.grid
    erosion = dist.cells_units >= tube_cells
    labels, _ = connected_components(erosion, FACE_VERTEX)
    flat_labels = labels.ravel()
    h = grid.spacing
    d_pair = min(dist.sq.ravel()[x], dist.sq.ravel()[y])
    level = h * float(np.sqrt(d_pair))
    return False, FailingPair(grid.cell(x), grid.cell(y), level, level / M,
                              int(flat_labels[x]), int(flat_labels[y]))


def _bfs_layers(allowed: np.ndarray, source: int, offsets: list[int]) -> np.ndarray:
    layer = np.full(allowed.size, -1, np.int64)
    layer[source] = 0
    queue = deque([source])
    while queue:
        c = queue.popleft()
        nxt = layer[c] + 1
        for off in offsets:
            m = c + off
            if 0 <= m < allowed.size and allowed[m] and layer[m] < 0:
                layer[m] = nxt
                queue.append(m)
    return layer


def witness_path(omega: DomainMask, x: Cell, y: Cell, r: float,
                 dist: DistanceField | None = None) -> TubeWitness:
    """Shortest face+vertex cell path from ``x`` to ``y`` inside ``erode(omega, r)``.

    Among equally short continuations a face step is preferred over a diagonal
    one, then the smaller flat index.
    """
    if not r > 0:
        raise InvalidParams(f"tube radius must be positive, got {r!r}")
    xi, yi = _as_flat(omega, x), _as_flat(omega, y)
    dist = edt(omega) if dist is None else dist
    grid = omega.grid
    allowed = (dist.value >= r).ravel()
    d_star = float(min(dist.value.ravel()[xi], dist.value.ravel()[yi]))
    if not (allowed[xi] and allowed[yi]):
        raise NotTubeConnected(f"endpoint outside erode(omega, {r!r})")
    offsets = neighbor_offsets(grid.dim_count, FACE_VERTEX)
    flat_offsets = _flat_offsets(grid)
    layer = _bfs_layers(allowed, yi, flat_offsets)
    if layer[xi] < 0:
        raise NotTubeConnected(f"{grid.cell(xi)} and {grid.cell(yi)} are in different "
                               f"components of erode(omega, {r!r})")
    # rank steps: face moves first, then by resulting index
    ranked = sorted(zip(offsets, flat_offsets), key=lambda p: (sum(v * v for v in p[0]), p[1]))
    path = [xi]
    cur = xi
    while cur != yi:
        want = layer[cur] - 1
        cur = next(cur + off for _, off in ranked if layer[cur + off] == want)
        path.append(cur)
    k_set = CompactSet(grid, np.array(path, np.int64))
    return TubeWitness((grid.cell(xi), grid.cell(yi)), d_star, float(r), k_set, tuple(path))


def check_membership(omega: DomainMask, params: ClassParams, witness_count: int = 0,
                     rng_seed: int = 0) -> MembershipReport:
    """Evaluate every condition of class membership and collect diagnostics.

    ``witness_count`` random pairs get an explicit tube path when the
    property holds.
    """
    grid = omega.grid
    params.validate_for(grid)
    nonempty = not omega.is_empty()
    compact = not (omega.inside & grid.margin()).any()
    connected = False
    if nonempty:
        _, count = connected_components(omega, FACE_VERTEX)
        connected = count == 1
    dist = edt(omega)
    inner_ball = None
    if nonempty:
        best = int(np.argmax(dist.sq.ravel()))
        radius = float(dist.value.ravel()[best])
        if radius >= params.R:
            inner_ball = (grid.cell(best), radius)
    cm_holds, failing, witnesses = None, None, None
    if nonempty and connected:
        cm_holds, failing = check_cm(omega, params.M, dist)
        if cm_holds and witness_count > 0:
            rng = np.random.default_rng(rng_seed)
            cells = omega.cells()
            witnesses = []
            for _ in range(witness_count):
                a, b = rng.choice(cells, 2)
                d_star = min(dist.value.ravel()[a], dist.value.ravel()[b])
                try:
                    witnesses.append(witness_path(omega, int(a), int(b), d_star / params.M, dist))
                except NotTubeConnected:
                    continue
    return MembershipReport(nonempty, connected, compact, inner_ball, cm_holds, failing, witnesses)


def _ball(grid, seed: int, R: float) -> np.ndarray:
    center = grid.center(seed)
    mesh = grid.mesh()
    d2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
    return (d2 < R * R) & ~grid.margin()


def _component_of(indicator: np.ndarray, cell: int) -> np.ndarray:
    labels, _ = connected_components(indicator, FACE_VERTEX)
    lab = labels.ravel()[cell]
    if lab < 0:
        return np.zeros_like(indicator, bool)
    return labels == lab


def _union_of_inner_balls(core: np.ndarray, sq: np.ndarray) -> np.ndarray:
    """Cells lying in an open ball ``B(z, edt(z))`` for some ``z`` in ``core``."""
    covered = np.zeros(core.shape, bool)
    levels = np.unique(sq[core])[::-1]
    for s in levels:
        centers = core & (sq >= s)
        d2, _ = nearest_feature_sq(centers)
        covered |= d2 < s
    return covered


def repair_to_class(omega: DomainMask, params: ClassParams, seed: Cell,
                    max_iter: int = 50) -> DomainMask:
    """Shrink ``omega`` into the class around ``seed``; a heuristic, not a projection.

    Members are returned unchanged.  Otherwise the open ``R``-ball at the seed
    is added, only the seed's component is kept, and while some level ``d``
    fails, the domain is replaced by the union of inner balls centred in the
    seed's component of ``erode(omega, d/M)``, minus the part of ``{edt >= d}``
    outside that component.

    Raises
    ------
    RepairFailed
        If the iteration empties the domain, loses the inner ball, or does not
        settle within ``max_iter`` rounds.
    """
    grid = omega.grid
    params.validate_for(grid)
    if not omega.is_empty() and check_membership(omega, params).member:
        return omega
    s = grid.flat(seed)
    cur = omega.inside | _ball(grid, s, params.R)
    for _ in range(max_iter):
        cur = _component_of(cur, s)
        if not cur.any():
            raise RepairFailed("repair emptied the domain")
        mask = DomainMask(grid, cur)
        dist = edt(mask)
        found = _sweep(mask, params.M, dist)
        if found is None:
            break
        level_sq, x, _, tube = found
        sq = dist.sq
        erosion = dist.cells_units >= tube
        if erosion.ravel()[s]:
            core = _component_of(erosion, s)
        else:
            # seed is too thin at this level: keep the component nearest to it
            level_set = np.flatnonzero((sq >= level_sq).ravel())
            coords = np.stack(np.unravel_index(level_set, grid.shape), axis=1)
            near = level_set[int(np.argmin(((coords - np.array(grid.cell(s))) ** 2).sum(axis=1)))]
            core = _component_of(erosion, int(near))
        drop = (sq >= level_sq) & ~core
        cur = _union_of_inner_balls(core, sq) & cur & ~drop
    else:
        raise RepairFailed(f"no fixpoint within {max_iter} rounds")
    result = DomainMask(grid, cur)
    if not check_membership(result, params).member:
        raise RepairFailed("repaired domain lost the inner ball")
    return result
