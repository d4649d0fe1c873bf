"""Selection of convergent subsequences, accumulation limits and the lemma checks.

A finite sequence with repetition stands in for an infinite one: over a fixed
grid there are finitely many masks, so some value recurs and exact
pigeonholing is sound.  "Eventually" and "liminf" are read over the tail of
the sequence, which starts at index ``(len - 1) // 2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cm_class import ClassParams, MembershipReport, check_membership
from .errors import InvalidParams, NotCompactlyInside
from .grid import (FACE, FACE_VERTEX, CompactSet, DomainMask, GridSpec, connected_components,
                   dilate, edt, nearest_feature_sq, same_grid)
from .metrics import rho
from .shapes import disk

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DomainSequence:
    masks: tuple
    labels: Optional[tuple] = None

    def __post_init__(self):
        masks = tuple(self.masks)
        if not masks:
            raise InvalidParams("a domain sequence needs at least one mask")
        same_grid(*masks)
        object.__setattr__(self, "masks", masks)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(masks):
                raise InvalidParams("labels must align with masks")
            object.__setattr__(self, "labels", labels)

    @property
    def grid(self) -> GridSpec:
        return self.masks[0].grid

    def __len__(self):
        return len(self.masks)

    def __getitem__(self, i):
        return self.masks[i]

    def __iter__(self):
        return iter(self.masks)

    def subsequence(self, indices) -> "DomainSequence":
        labels = None if self.labels is None else [self.labels[i] for i in indices]
        return DomainSequence([self.masks[i] for i in indices], labels)


@dataclass(frozen=True)
class ConvergenceReport:
    selected_indices: list
    limit: DomainMask
    residuals: list
    cauchy_tol: float
    limit_membership: Optional[MembershipReport] = None
    degenerate: bool = False
    head_prefix: int = 0
    warning: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "selected_indices": list(self.selected_indices),
            "residuals": list(self.residuals),
            "cauchy_tol": self.cauchy_tol,
            "degenerate": self.degenerate,
            "head_prefix": self.head_prefix,
            "warning": self.warning,
            "limit_count": self.limit.count,
            "limit_membership": (None if self.limit_membership is None
                                 else self.limit_membership.to_dict()),
        }


def pairwise_rho(seq: DomainSequence) -> np.ndarray:
    """Matrix of complement distances, computed once per distinct mask pair."""
    distinct: list[DomainMask] = []
    slot = {}
    which = []
    for m in seq:
        if m not in slot:
            slot[m] = len(distinct)
            distinct.append(m)
        which.append(slot[m])
    k = len(distinct)
    small = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            small[i, j] = small[j, i] = rho(distinct[i], distinct[j]).value
    which = np.asarray(which)
    return small[np.ix_(which, which)]


def select_convergent(seq: DomainSequence, tol: float, params: ClassParams | None = None,
                      distances: np.ndarray | None = None) -> ConvergenceReport:
    """Pick the densest cluster under the complement distance and its medoid.

    The cluster is centred on the mask with the most sequence entries within
    ``tol`` (earliest on ties); the limit is the cluster member minimizing the
    largest distance to the others (earliest on ties).  When no mask recurs
    the result is flagged ``degenerate`` instead of raising.
    """
    if tol < 0:
        raise InvalidParams(f"tol must be nonnegative, got {tol!r}")
    D = pairwise_rho(seq) if distances is None else np.asarray(distances)
    near = D <= tol
    counts = near.sum(axis=1)
    center = int(np.argmax(counts))
    selected = [int(i) for i in np.flatnonzero(near[center])]
    spread = D[np.ix_(selected, selected)].max(axis=1)
    medoid = selected[int(np.argmin(spread))]
    limit = seq[medoid]
    residuals = [float(D[i, medoid]) for i in selected]
    degenerate = len(selected) == 1 and len(seq) > 1
    warning = None
    if degenerate:
        warning = "no mask recurs within tol; returning the best single-element cluster"
        log.warning(warning)
    membership = check_membership(limit, params) if params is not None else None
    return ConvergenceReport(selected, limit, residuals, float(tol), membership, degenerate, 0,
                             warning)


def tail_start(n: int) -> int:
    return (n - 1) // 2


def accumulation_limit(sets: Sequence[CompactSet], tol: float) -> CompactSet:
    """Cells within ``tol`` of some tail member: the grid reading of
    "accumulation point of sequences ``x_n`` in ``A_n``"."""
    grid = same_grid(*sets)
    best = None
    for K in sets[tail_start(len(sets)):]:
        sq, _ = nearest_feature_sq(K.indicator())
        best = sq if best is None else np.minimum(best, sq)
    return CompactSet.from_indicator(grid, grid.spacing * np.sqrt(best) <= tol)


def h_limit_accumulation(seq: DomainSequence, tol: float) -> DomainMask:
    """Limit mask whose complement is the accumulation set of the complements."""
    if len(seq) < 2:
        raise InvalidParams("need at least two masks")
    grid = seq.grid
    best = None
    for m in seq.masks[tail_start(len(seq)):]:
        d = edt(m).value     # distance to the closed complement
        best = d if best is None else np.minimum(best, d)
    return DomainMask(grid, best > tol)


def gamma_property_check(seq: DomainSequence, limit: DomainMask, K: CompactSet) -> tuple[bool, int]:
    """Find the first index from which every mask contains ``K``.

    ``K`` together with its face halo must lie inside ``limit``.  Returns
    ``(True, n_K)`` or ``(False, last_violating_index)`` when the last mask
    misses part of ``K``.
    """
    same_grid(seq[0], limit, K)
    halo = dilate(K.indicator(), FACE)
    if (halo & ~limit.inside).any():
        raise NotCompactlyInside("K plus its face halo leaves the limit domain")
    covered = np.array([m.inside.ravel()[K.cells].all() for m in seq])
    misses = np.flatnonzero(~covered)
    if misses.size == 0:
        return True, 0
    last = int(misses[-1])
    if last == len(seq) - 1:
        return False, last
    return True, last + 1


@dataclass(frozen=True)
class LemmaResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def check_nested_limits(inner: Sequence[CompactSet], outer: Sequence[CompactSet],
                        tol: float) -> LemmaResult:
    """Limits of termwise nested sequences stay nested."""
    if len(inner) != len(outer):
        raise InvalidParams("sequences must have equal length")
    for a, b in zip(inner, outer):
        if not a.issubset(b):
            raise InvalidParams("inner sequence is not termwise contained in the outer one")
    A = accumulation_limit(inner, tol)
    B = accumulation_limit(outer, tol)
    escaped = np.setdiff1d(A.cells, B.cells)
    detail = {"inner_limit_size": len(A), "outer_limit_size": len(B)}
    if escaped.size:
        detail["counterexample"] = list(A.grid.cell(escaped[0]))
    return LemmaResult("nested_limit", escaped.size == 0, detail)


def check_ball_limit(grid: GridSpec, centers, radii, tol: float) -> LemmaResult:
    """Limit of balls with radii at least ``r0`` contains a radius-``r0`` ball.

    The limit centre is the mean of the tail centres; containment is checked
    for the ball shrunk by ``tol`` plus the tail's spread around that mean.
    """
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    balls = DomainSequence([disk(grid, c, r) for c, r in zip(centers, radii)])
    D = h_limit_accumulation(balls, tol)
    tail = centers[tail_start(len(centers)):]
    x0 = tail.mean(axis=0)
    spread = float(np.linalg.norm(tail - x0, axis=1).max())
    r0 = float(radii.min())
    reach = r0 - tol - spread
    mesh = grid.mesh()
    d2 = sum((m - c) ** 2 for m, c in zip(mesh, x0))
    must = d2 < reach ** 2 if reach > 0 else np.zeros(grid.shape, bool)
    missing = must & ~D.inside
    detail = {"center": [float(v) for v in x0], "r0": r0, "spread": spread,
              "checked_radius": max(reach, 0.0), "checked_cells": int(must.sum())}
    if missing.any():
        detail["counterexample"] = [int(v) for v in np.argwhere(missing)[0]]
    return LemmaResult("ball_limit", not missing.any(), detail)


def check_connected_limit(sets: Sequence[CompactSet], tol: float) -> LemmaResult:
    """Limit of connected sets is connected, up to a one-cell dilation."""
    for K in sets:
        _, n = connected_components(K, FACE_VERTEX)
        if n != 1:
            raise InvalidParams("every set in the sequence must be connected")
    K = accumulation_limit(sets, tol)
    grown = dilate(K.indicator(), FACE_VERTEX)
    _, count = connected_components(grown, FACE_VERTEX)
    return LemmaResult("connected_limit", count == 1, {"components": count, "size": len(K)})


def check_gamma(seq: DomainSequence, limit: DomainMask, tol: float) -> LemmaResult:
    """Gamma property on the core ``{edt_limit >= tol + 2h}`` of the limit."""
    h = limit.grid.spacing
    core = edt(limit).value >= tol + 2 * h
    if not core.any():
        return LemmaResult("gamma_property", True, {"vacuous": True})
    K = CompactSet.from_indicator(limit.grid, core)
    ok, n_k = gamma_property_check(seq, limit, K)
    return LemmaResult("gamma_property", ok, {"n_K": n_k, "core_size": len(K)})


def lemma_suite(seq: DomainSequence, tol: float, params: ClassParams | None = None
                ) -> dict[str, LemmaResult]:
    """Run the nested-limit, ball-limit, connected-limit and Gamma checks.

    The checks run on the subsequence chosen by :func:`select_convergent`.
    Inner balls are centred at each mask's EDT maximum with radius ``params.R``
    when given, else the full inradius.
    """
    report = select_convergent(seq, tol)
    sub = seq.subsequence(report.selected_indices)
    grid = seq.grid
    centers, radii = [], []
    for m in sub:
        dist = edt(m)
        best = int(np.argmax(dist.sq.ravel()))
        centers.append(grid.center(best))
        radius = float(dist.value.ravel()[best])
        radii.append(min(radius, params.R) if params is not None else radius)
    complements = [CompactSet.from_indicator(grid, ~m.inside) for m in sub]
    ball_complements = [CompactSet.from_indicator(grid, ~disk(grid, c, r).inside)
                        for c, r in zip(centers, radii)]
    results = [
        check_nested_limits(complements, ball_complements, tol),
        check_ball_limit(grid, centers, radii, tol),
        check_connected_limit([CompactSet.from_indicator(grid, m.inside) for m in sub], tol),
        check_gamma(sub, report.limit, tol),
    ]
    return {r.name: r for r in results}
