# %% [markdown]
# # Convergent subsequences of class members
#
# Over a fixed grid there are only finitely many masks, so any long sequence
# repeats itself.  Selection clusters the sequence under the complement
# distance and returns the cluster medoid as the limit.

# %%
import numpy as np

from cmdomains import (ClassParams, DomainSequence, GridSpec, check_membership,
                       h_limit_accumulation, lemma_suite, rho, select_convergent)
from cmdomains.shapes import disk, random_convex

rng = np.random.default_rng(1)
grid = GridSpec((64, 64), 1 / 64)
params = ClassParams(M=4, R=0.1)
pool = []
while len(pool) < 6:
    m = random_convex(grid, rng, (0.5, 0.5), 0.15, 0.38)
    if check_membership(m, params).member:
        pool.append(m)

seq = DomainSequence([pool[i] for i in rng.choice(6, 30, p=[.4, .2, .1, .1, .1, .1])])
rep = select_convergent(seq, tol=2 / 64, params=params)
print("selected", len(rep.selected_indices), "of", len(seq), "; limit is a member:",
      rep.limit_membership.member)

# %% [markdown]
# A translating disk converges to its resting position.  The medoid and the
# accumulation-point limit agree up to the tolerance.

# %%
moving = DomainSequence([disk(grid, (0.5 + 0.1 / n, 0.5), 0.25) for n in range(1, 30)])
tol = 2 / 64
rep = select_convergent(moving, tol)
acc = h_limit_accumulation(moving.subsequence(rep.selected_indices), tol)
print("medoid vs accumulation limit:", rho(rep.limit, acc).value, "<=", 2 * tol)

# %%
for name, result in lemma_suite(moving, tol, params).items():
    print(f"{name:16s} {'pass' if result.passed else 'FAIL'} {result.detail}")
