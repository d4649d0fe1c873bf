"""Finite-difference Dirichlet solver for ``-div(A grad u) = f`` on a masked domain.

Fluxes are two-point face fluxes: across the face between two neighboring
cells along axis ``d`` the coefficient is the average of the two cells'
``A[d, d]`` entries.  Cells outside the domain carry the homogeneous Dirichlet
value, so the solution is the zero extension of the interior solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDomain, GridMismatch, InvalidParams, NoConvergence, SupportViolation
from .grid import DomainMask, GridSpec, _frozen


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    value: np.ndarray

    def __post_init__(self):
        value = np.asarray(self.value, float)
        if value.shape != self.grid.shape:
            raise InvalidParams(f"field shape {value.shape} does not match grid {self.grid.shape}")
        if not np.isfinite(value).all():
            raise InvalidParams("field values must be finite")
        object.__setattr__(self, "value", _frozen(value))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        return cls(grid, np.broadcast_to(np.asarray(fn(*grid.mesh()), float), grid.shape))

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.value, other.value)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EllipticCoefficients:
    """Symmetric matrix per cell with a declared ellipticity constant ``alpha``.

    Construction checks symmetry (to 1e-12) and that every cell's smallest
    eigenvalue is at least ``alpha > 0``.
    """

    grid: GridSpec
    entries: np.ndarray
    alpha: float

    def __post_init__(self):
        k = self.grid.dim_count
        entries = np.asarray(self.entries, float)
        if entries.shape == (k, k):
            entries = np.broadcast_to(entries, self.grid.shape + (k, k))
        if entries.shape != self.grid.shape + (k, k):
            raise InvalidParams(f"coefficient shape {entries.shape} does not match grid")
        if not np.isfinite(entries).all():
            raise InvalidParams("coefficients must be finite")
        alpha = float(self.alpha)
        if not alpha > 0:
            raise InvalidParams(f"ellipticity constant must be positive, got {alpha!r}")
        asym = np.abs(entries - np.swapaxes(entries, -1, -2)).max()
        if asym > 1e-12:
            raise InvalidParams(f"coefficient matrix not symmetric (max deviation {asym:.3g})")
        flat = entries.reshape(-1, k, k)
        uniq = np.unique(flat, axis=0)
        lam = np.linalg.eigvalsh(0.5 * (uniq + np.swapaxes(uniq, -1, -2))).min()
        if lam < alpha * (1 - 1e-12):
            raise InvalidParams(f"smallest eigenvalue {lam!r} is below alpha={alpha!r}")
        object.__setattr__(self, "entries", _frozen(entries))
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def identity(cls, grid: GridSpec) -> "EllipticCoefficients":
        return cls(grid, np.eye(grid.dim_count), 1.0)

    @classmethod
    def constant(cls, grid: GridSpec, matrix, alpha: float | None = None) -> "EllipticCoefficients":
        matrix = np.asarray(matrix, float)
        if alpha is None:
            alpha = float(np.linalg.eigvalsh(matrix).min())
        return cls(grid, matrix, alpha)

    def face_coefficients(self, axis: int) -> np.ndarray:
        """Average of ``A[axis, axis]`` over each pair of neighbors along ``axis``.

        Shape is the grid shape with one fewer cell along ``axis``.
        """
        diag = self.entries[..., axis, axis]
        lo = [slice(None)] * self.grid.dim_count
        hi = [slice(None)] * self.grid.dim_count
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        return 0.5 * (diag[tuple(lo)] + diag[tuple(hi)])


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    relative_residual: float
    dirichlet_energy: float
    load_pairing: float


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """Assembled operator on the full grid.

    ``matrix`` is ``N x N`` with identity rows on cells outside the domain;
    ``interior`` lists the domain cells and ``reduced`` is the SPD block on them.
    """

    grid: GridSpec
    mask: DomainMask
    matrix: sp.csr_matrix
    interior: np.ndarray
    reduced: sp.csr_matrix = field(repr=False)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(u, float).ravel()).reshape(self.grid.shape)


def _check_grids(*objs):
    grid = objs[0].grid
    for obj in objs[1:]:
        if obj.grid != grid:
            raise GridMismatch(f"grids differ: {grid} vs {obj.grid}")
    return grid


def assemble(omega: DomainMask, A: EllipticCoefficients) -> EllipticOperator:
    grid = _check_grids(omega, A)
    if omega.is_empty():
        raise EmptyDomain("cannot assemble on an empty domain")
    h2 = grid.spacing ** 2
    n = grid.size
    inside = omega.inside
    index = np.arange(n).reshape(grid.shape)
    diag = np.zeros(grid.shape)
    rows, cols, vals = [], [], []
    for axis in range(grid.dim_count):
        a = A.face_coefficients(axis) / h2
        lo = [slice(None)] * grid.dim_count
        hi = [slice(None)] * grid.dim_count
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        in_lo, in_hi = inside[lo], inside[hi]
        # a face touching the domain loads the diagonal of its inside cells
        diag[lo] += np.where(in_lo, a, 0.0)
        diag[hi] += np.where(in_hi, a, 0.0)
        both = in_lo & in_hi
        i, j, w = index[lo][both], index[hi][both], a[both]
        rows += [i, j]
        cols += [j, i]
        vals += [-w, -w]
    diag = np.where(inside, diag, 1.0).ravel()
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    matrix = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n))
    interior = omega.cells()
    reduced = matrix[interior][:, interior].tocsr()
    return EllipticOperator(grid, omega, matrix, interior, reduced)


def _pcg(L: sp.csr_matrix, b: np.ndarray, tol: float, maxiter: int) -> tuple[np.ndarray, int, float]:
    """Jacobi-preconditioned conjugate gradients from a zero start.

    Stops on the true relative residual ``||b - Lx|| / ||b||``.
    """
    inv_diag = 1.0 / L.diagonal()
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    r = b.copy()
    it = 0
    while True:
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        while np.linalg.norm(r) > tol * bnorm:
            if it >= maxiter:
                raise NoConvergence(f"no convergence after {it} iterations "
                                    f"(relative residual {np.linalg.norm(r) / bnorm:.3e})")
            Lp = L @ p
            step = rz / (p @ Lp)
            x += step * p
            r -= step * Lp
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
            it += 1
        # recurrence residual can drift from the true one; restart if so
        r = b - L @ x
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return x, it, float(rel)


def solve_dirichlet(omega: DomainMask, A: EllipticCoefficients, f: ScalarField,
                    tol: float = 1e-8, operator: EllipticOperator | None = None
                    ) -> tuple[ScalarField, SolveReport]:
    """Solve the homogeneous Dirichlet problem on ``omega`` and extend by zero.

    Parameters
    ----------
    omega : DomainMask
        Domain; must be nonempty.
    A : EllipticCoefficients
    f : ScalarField
        Load, defined on the whole grid; only its values on ``omega`` matter.
    tol : float
        Relative residual target in ``(0, 1)``, measured on domain cells.
    operator : EllipticOperator, optional
        A previously assembled operator for the same ``omega`` and ``A``.

    Returns
    -------
    (ScalarField, SolveReport)
        The zero-extended solution and solver diagnostics.
    """
    grid = _check_grids(omega, A, f)
    if not 0 < tol < 1:
        raise InvalidParams(f"tol must lie in (0, 1), got {tol!r}")
    op = operator if operator is not None else assemble(omega, A)
    b = f.value.ravel()[op.interior]
    u = np.zeros(grid.size)
    if not b.any():
        return ScalarField(grid, u.reshape(grid.shape)), SolveReport(0, 0.0, 0.0, 0.0)
    maxiter = int(50 * np.sqrt(grid.size))
    x, iterations, rel = _pcg(op.reduced, b, tol, maxiter)
    u[op.interior] = x
    vol = grid.cell_volume
    energy = float(x @ (op.reduced @ x)) * vol
    load = float(b @ x) * vol
    return ScalarField(grid, u.reshape(grid.shape)), SolveReport(iterations, rel, energy, load)


def _face_differences(u: np.ndarray, axis: int) -> np.ndarray:
    return np.diff(u, axis=axis)


def energy_terms(u: ScalarField, A: EllipticCoefficients) -> tuple[float, float]:
    """``(sum |grad u|^2 h^k, sum <A grad u, grad u> h^k)`` with face-difference gradients."""
    grid = _check_grids(u, A)
    h = grid.spacing
    grad_sq, weighted = [], []
    for axis in range(grid.dim_count):
        g2 = (_face_differences(u.value, axis) / h) ** 2
        grad_sq.append(g2.ravel())
        weighted.append((A.face_coefficients(axis) * g2).ravel())
    vol = grid.cell_volume
    return float(np.sum(np.concatenate(grad_sq))) * vol, float(np.sum(np.concatenate(weighted))) * vol


def check_support(u: ScalarField, omega: DomainMask, atol: float = 1e-14) -> None:
    outside = ~omega.inside & (np.abs(u.value) > atol)
    if outside.any():
        cell = np.unravel_index(int(np.flatnonzero(outside.ravel())[0]), u.grid.shape)
        raise SupportViolation(cell, u.value[cell])


def energy_check(u: ScalarField, omega: DomainMask, A: EllipticCoefficients, f: ScalarField,
                 tol: float = 1e-8) -> bool:
    """Check ``alpha*|grad u|^2 <= <A grad u, grad u> = <f, u>`` on the grid.

    The inequality must hold exactly; the identity within
    ``10 * tol * ||f|| * ||u||`` (discrete L2 norms over the domain).
    """
    grid = _check_grids(u, omega, A, f)
    check_support(u, omega)
    _, energy = energy_terms(u, A)
    # termwise a_face >= alpha, so the scaled sums compare exactly
    lower = float(np.sum(np.concatenate([
        (A.alpha * (_face_differences(u.value, axis) / grid.spacing) ** 2).ravel()
        for axis in range(grid.dim_count)]))) * grid.cell_volume
    vol = grid.cell_volume
    fu = f.value[omega.inside]
    uu = u.value[omega.inside]
    load = float(fu @ uu) * vol
    slack = 10 * tol * np.linalg.norm(fu) * np.linalg.norm(uu) * vol
    return bool(lower <= energy and abs(energy - load) <= slack)
