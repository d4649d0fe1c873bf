# %% [markdown]
# # Deciding the tube property and repairing masks
#
# Two cells ``x`` and ``y`` with boundary distances ``d(x)``, ``d(y)`` must be
# joined by a connected set of cells that stays at distance at least
# ``min(d(x), d(y)) / M`` from the outside.  A dumbbell with a thin neck breaks
# this for small ``M``.

# %%
from cmdomains import ClassParams, check_cm, check_membership, max_tube_radius, repair_to_class, witness_path
from cmdomains.shapes import dumbbell, dumbbell_grid

grid = dumbbell_grid()                    # h = 1/128
bell = dumbbell(grid)                     # disks of radius 0.2, neck half-width 0.02
left, right = grid.nearest_cell((-0.3, 0)), grid.nearest_cell((0.3, 0))
print("widest tube between the centers:", max_tube_radius(bell, left, right))

# %%
for M in (4, 5, 10, 20):
    ok, pair = check_cm(bell, M)
    print(f"M={M:>2}: {'holds' if ok else 'fails'}", "" if ok else f"at {pair.x} / {pair.y}")

# %% [markdown]
# When the property holds, a witness path can be extracted and checked on its
# own: every cell on it keeps the required distance.

# %%
w = witness_path(bell, left, right, 0.015)
print(len(w.path()), "cells on the path; radius", w.radius)

# %% [markdown]
# Full membership also asks for connectedness, the clear margin and an inner
# ball of radius ``R``.  Repair shrinks a non-member around a seed cell until
# it qualifies.

# %%
params = ClassParams(M=5, R=0.1)
print("member before repair:", check_membership(bell, params).member)
fixed = repair_to_class(bell, params, left)
print("member after repair:", check_membership(fixed, params).member,
      f"({bell.count} -> {fixed.count} cells)")
