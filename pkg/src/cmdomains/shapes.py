"""Rasterized test domains: disks, boxes, convex polygons, dumbbells and random blobs."""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull

from .grid import FACE_VERTEX, DomainMask, GridSpec, connected_components


def disk(grid: GridSpec, center, radius: float) -> DomainMask:
    c = np.asarray(center, float)
    return DomainMask.from_predicate(
        grid, lambda *x: sum((xi - ci) ** 2 for xi, ci in zip(x, c)) < radius ** 2)


def ellipse(grid: GridSpec, center, semi_axes) -> DomainMask:
    c = np.asarray(center, float)
    a = np.asarray(semi_axes, float)
    return DomainMask.from_predicate(
        grid, lambda *x: sum(((xi - ci) / ai) ** 2 for xi, ci, ai in zip(x, c, a)) < 1)


def box(grid: GridSpec, lower, upper) -> DomainMask:
    lo = np.asarray(lower, float)
    hi = np.asarray(upper, float)
    return DomainMask.from_predicate(
        grid, lambda *x: np.logical_and.reduce([(xi > l) & (xi < u) for xi, l, u in zip(x, lo, hi)]))


def convex_polygon(grid: GridSpec, points) -> DomainMask:
    """Interior of the convex hull of ``points`` (2-D or higher)."""
    hull = ConvexHull(np.asarray(points, float))
    eq = hull.equations          # rows (normal, offset) with normal.x + offset <= 0 inside

    def inside(*x):
        pts = np.stack([xi.ravel() for xi in x], axis=1)
        ok = (pts @ eq[:, :-1].T + eq[:, -1] < 0).all(axis=1)
        return ok.reshape(x[0].shape)

    return DomainMask.from_predicate(grid, inside)


def dumbbell(grid: GridSpec, radius: float = 0.2, offset: float = 0.3,
             neck_half_width: float = 0.02) -> DomainMask:
    """Two disks centred at ``(+-offset, 0)`` joined by a straight neck."""
    def inside(x, y):
        left = (x + offset) ** 2 + y ** 2 < radius ** 2
        right = (x - offset) ** 2 + y ** 2 < radius ** 2
        neck = (np.abs(x) <= offset) & (np.abs(y) < neck_half_width)
        return left | right | neck
    return DomainMask.from_predicate(grid, inside)


def dumbbell_grid(spacing: float = 1 / 128) -> GridSpec:
    return GridSpec.box([-0.55, -0.25], [0.55, 0.25], spacing)


def random_blob(grid: GridSpec, rng: np.random.Generator, smoothing: float = 2.0,
                fill: float = 0.5) -> DomainMask:
    """Largest face+vertex component of thresholded smoothed noise.

    ``fill`` is roughly the fraction of interior cells kept before the
    component filter.  The result may be empty for extreme settings.
    """
    noise = ndimage.gaussian_filter(rng.standard_normal(grid.shape), smoothing, mode="constant")
    interior = ~grid.margin()
    thresh = np.quantile(noise[interior], 1 - fill)
    raw = (noise > thresh) & interior
    labels, count = connected_components(raw, FACE_VERTEX)
    if count == 0:
        return DomainMask.empty(grid)
    sizes = np.bincount(labels[labels >= 0])
    return DomainMask(grid, labels == int(np.argmax(sizes)))


def random_convex(grid: GridSpec, rng: np.random.Generator, center, min_radius: float,
                  max_radius: float, vertices: int = 7) -> DomainMask:
    """Random convex polygon whose vertices lie between the two radii around ``center``."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, vertices))
    radii = rng.uniform(min_radius, max_radius, vertices)
    pts = np.asarray(center, float) + np.stack([radii * np.cos(angles), radii * np.sin(angles)], 1)
    return convex_polygon(grid, pts)
