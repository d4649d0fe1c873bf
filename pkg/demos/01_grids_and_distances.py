# %% [markdown]
# # Grids, masks and the distance transform
#
# A domain is a boolean field over a box of square cells.  The outermost ring
# of cells must stay false, which is how a mask encodes sitting strictly
# inside the box.  Distances are measured between cell centers.

# %%
import numpy as np

from cmdomains import FACE, FACE_VERTEX, GridSpec, boundary_cells, connected_components, edt, erode
from cmdomains.shapes import disk, dumbbell, dumbbell_grid

grid = GridSpec((48, 48), 1 / 48)
omega = disk(grid, (0.5, 0.5), 0.35)
print(grid.shape, "cells,", omega.count, "inside")

# %% [markdown]
# The exact Euclidean distance transform gives, for each inside cell, the
# distance to the nearest outside cell center.  Squared distances are kept as
# integers in cell units, so thresholds compare exactly.

# %%
d = edt(omega)
center = grid.nearest_cell((0.5, 0.5))
print("distance at the center:", d.at(center), "integer square:", d.sq[center])
print("largest distance:", d.value.max())

# %% [markdown]
# Eroding by ``r`` keeps cells at distance at least ``r``.

# %%
for r in (0.05, 0.15, 0.3):
    print(f"erode r={r}: {erode(omega, r, d).count} cells")

# %% [markdown]
# Inside cells connect through faces and corners; the outside connects
# through faces only.  A dumbbell with a very thin neck shows the difference
# once it is eroded.

# %%
bell = dumbbell(dumbbell_grid(1 / 64), neck_half_width=0.02)
for r in (0.02, 0.05):
    core = erode(bell, r)
    print(f"dumbbell eroded by {r}: {connected_components(core, FACE_VERTEX)[1]} component(s)")
ring = boundary_cells(omega)
print("boundary ring:", len(ring), "cells;",
      connected_components(ring, FACE)[1], "face-connected piece(s)")
