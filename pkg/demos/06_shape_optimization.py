# %% [markdown]
# # Matching a target state by annealing the domain
#
# The target ``g`` is the solution on a disk.  Starting from a square, each
# proposal flips a few cells, is repaired back into the class and is scored
# by ``J = 1/2 sum (u - g)^2 h^2``.

# %%
from cmdomains import (ClassParams, EllipticCoefficients, GridSpec, Objective, OptimizerConfig,
                       ScalarField, evaluate, minimizing_sequence_report, optimize, rho,
                       solve_dirichlet)
from cmdomains.shapes import box, disk

grid = GridSpec((32, 32), 1 / 32)
A = EllipticCoefficients.identity(grid)
f = ScalarField.constant(grid, 1.0)
target = disk(grid, (0.5, 0.5), 0.3)
g, _ = solve_dirichlet(target, A, f, 1e-10)
obj = Objective(g, f, A, pde_tol=1e-10)
start = box(grid, (0.25, 0.25), (0.75, 0.75))
J0 = evaluate(start, obj)[0]
print("J(start) =", J0)

# %%
config = OptimizerConfig(ClassParams(M=4, R=0.1), budget=600, initial_temperature=1e-4 * J0,
                         cooling=0.995, rng_seed=0)
trace = optimize(obj, config, start)
for it, mask, J in trace.best_history[:: max(1, len(trace.best_history) // 8)]:
    print(f"iteration {it:4d}: J/J0 = {J / J0:.3e}")
print("best J/J0:", trace.best_J / J0, " distance to target:", rho(trace.best_mask, target).value)

# %% [markdown]
# Every stored improvement can be re-solved and re-checked after the fact.

# %%
report = minimizing_sequence_report(trace)
print(len(report.iterations), "improvements verified; limit", report.limit)
