"""Hausdorff distance between cell sets and the complement distance between masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySet, NotContained
from .grid import CompactSet, DomainMask, closed_complement, edt, nearest_feature_sq, same_grid


@dataclass(frozen=True)
class MetricReport:
    """Two-sided Hausdorff distance with the cell pairs realizing each directed sup.

    ``forward`` is ``(x, y)`` with ``x`` in the first set and ``y`` its nearest
    cell in the second; ``backward`` is the same for the reverse direction.
    ``sq`` is the squared distance in cell units.
    """

    value: float
    forward: tuple[tuple[int, ...], tuple[int, ...]]
    backward: tuple[tuple[int, ...], tuple[int, ...]]
    sq: int

    def to_dict(self) -> dict:
        return {"value": self.value,
                "forward": [list(self.forward[0]), list(self.forward[1])],
                "backward": [list(self.backward[0]), list(self.backward[1])]}


def _nearest_in(target: CompactSet, cell: int) -> int:
    grid = target.grid
    here = np.array(grid.cell(cell))
    d2 = ((target.coords() - here) ** 2).sum(axis=1)
    return int(target.cells[int(np.argmin(d2))])


def directed_sq(K1: CompactSet, K2: CompactSet) -> tuple[int, int, int]:
    """Largest squared distance from a cell of ``K1`` to ``K2``.

    Returns ``(sq, x, y)``; ties resolve to the smallest flat indices.
    """
    sq_to_k2, _ = nearest_feature_sq(K2.indicator())
    sq = sq_to_k2.ravel()[K1.cells]
    pos = int(np.argmax(sq))
    x = int(K1.cells[pos])
    return int(sq[pos]), x, _nearest_in(K2, x)


def _check_pair(K1, K2):
    grid = same_grid(K1, K2)
    if len(K1) == 0 or len(K2) == 0:
        raise EmptySet("Hausdorff distance needs nonempty sets")
    return grid


def delta(K1: CompactSet, K2: CompactSet) -> MetricReport:
    """Exact Hausdorff distance between the cell-center sets of ``K1`` and ``K2``."""
    grid = _check_pair(K1, K2)
    sq_f, x_f, y_f = directed_sq(K1, K2)
    sq_b, y_b, x_b = directed_sq(K2, K1)
    sq = max(sq_f, sq_b)
    return MetricReport(grid.spacing * float(np.sqrt(sq)),
                        (grid.cell(x_f), grid.cell(y_f)),
                        (grid.cell(y_b), grid.cell(x_b)), sq)


def rho(omega1: DomainMask, omega2: DomainMask) -> MetricReport:
    """Hausdorff distance between the closed complements of two masks."""
    same_grid(omega1, omega2)
    return delta(closed_complement(omega1), closed_complement(omega2))


def eps_cover_check(A: CompactSet, B: CompactSet, eps: float) -> bool:
    """True iff every cell of ``A`` lies in an open ``eps``-ball around some cell of ``B``."""
    grid = _check_pair(A, B)
    sq_to_b, _ = nearest_feature_sq(B.indicator())
    dist = grid.spacing * np.sqrt(sq_to_b.ravel()[A.cells])
    return bool((dist < eps).all())


def dist_compact_to_boundary(K: CompactSet, omega: DomainMask) -> float:
    """Distance from ``K`` to the complement of ``omega``; ``K`` must lie inside."""
    same_grid(K, omega)
    inside = omega.inside.ravel()[K.cells]
    if not inside.all():
        bad = K.grid.cell(K.cells[int(np.argmin(inside))])
        raise NotContained(f"cell {bad} of K is outside the domain")
    return float(edt(omega).value.ravel()[K.cells].min())


def delta_bruteforce(K1: CompactSet, K2: CompactSet) -> float:
    """Reference Hausdorff distance by the double loop over all cell pairs."""
    grid = _check_pair(K1, K2)
    a = K1.coords().astype(np.int64)
    b = K2.coords().astype(np.int64)
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    sq = max(int(d2.min(axis=1).max()), int(d2.min(axis=0).max()))
    return grid.spacing * float(np.sqrt(sq))
