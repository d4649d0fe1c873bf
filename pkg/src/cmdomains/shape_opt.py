"""Tracking-type shape optimization over the domain class by simulated annealing.

Every proposal is repaired back into the class before it is evaluated, so the
chain only ever visits admissible domains.  The best value found is an
estimate of the infimum, not a certified minimizer.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cm_class import ClassParams, check_membership, repair_to_class
from .elliptic import EllipticCoefficients, ScalarField, energy_check, solve_dirichlet
from .errors import GridMismatch, InfeasibleInit, InvalidParams, RepairFailed, TraceCorrupt
from .grid import FACE, DomainMask, dilate, edt, neighbor_offsets

log = logging.getLogger(__name__)

MOVES = ("boundary_flip", "patch_flip", "reanchor")


@dataclass(frozen=True, eq=False)
class Objective:
    g: ScalarField
    f: ScalarField
    A: EllipticCoefficients
    pde_tol: float = 1e-10

    def __post_init__(self):
        if not (self.g.grid == self.f.grid == self.A.grid):
            raise GridMismatch("target, load and coefficients must share a grid")
        if not 0 < self.pde_tol < 1:
            raise InvalidParams(f"pde_tol must lie in (0, 1), got {self.pde_tol!r}")

    @property
    def grid(self):
        return self.g.grid


@dataclass(frozen=True)
class OptimizerConfig:
    params: ClassParams
    budget: int = 2000
    initial_temperature: float = 1e-6
    cooling: float = 0.998
    move_mix: tuple = (0.7, 0.2, 0.1)
    rng_seed: int = 0
    chains: int = 1
    max_attempts: int = 8
    debug: bool = False

    def __post_init__(self):
        mix = self.move_mix
        if isinstance(mix, dict):
            unknown = set(mix) - set(MOVES)
            if unknown:
                raise InvalidParams(f"unknown moves {sorted(unknown)}")
            mix = tuple(float(mix.get(m, 0.0)) for m in MOVES)
        mix = tuple(float(p) for p in mix)
        if len(mix) != len(MOVES) or min(mix) < 0 or abs(sum(mix) - 1) > 1e-9:
            raise InvalidParams(f"move_mix must be {len(MOVES)} probabilities summing to 1")
        object.__setattr__(self, "move_mix", mix)
        if int(self.budget) != self.budget or self.budget < 0:
            raise InvalidParams(f"budget must be a nonnegative integer, got {self.budget!r}")
        if not self.initial_temperature > 0:
            raise InvalidParams("initial_temperature must be positive")
        if not 0 < self.cooling < 1:
            raise InvalidParams("cooling must lie in (0, 1)")
        if int(self.chains) != self.chains or self.chains < 1:
            raise InvalidParams("chains must be a positive integer")
        if self.max_attempts < 1:
            raise InvalidParams("max_attempts must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    move: str
    repaired: bool
    J: float
    accepted: bool
    temperature: float
    best_J: float
    failed_attempts: int = 0

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "move": self.move, "repaired": self.repaired,
                "J": self.J, "accepted": self.accepted, "temperature": self.temperature,
                "best_J": self.best_J, "failed_attempts": self.failed_attempts}


@dataclass(frozen=True, eq=False)
class OptTrace:
    """Iteration log of the winning chain plus the history of strict improvements.

    ``best_history`` holds ``(iteration, mask, J)`` each time the best value
    dropped; its last entry is the best mask.
    """

    records: tuple
    best_mask: DomainMask
    best_J: float
    best_history: tuple
    objective: Objective
    config: OptimizerConfig
    chain: int = 0
    chain_best: tuple = ()

    @property
    def inf_estimate(self) -> float:
        return self.best_J

    def summary(self) -> dict:
        return {"best_J": self.best_J, "inf_estimate": self.inf_estimate,
                "iterations": len(self.records) - 1, "chain": self.chain,
                "chain_best": [list(c) for c in self.chain_best],
                "improvements": [[it, J] for it, _, J in self.best_history],
                "accepted": sum(r.accepted for r in self.records)}


def evaluate(omega: DomainMask, obj: Objective) -> tuple[float, ScalarField]:
    """Tracking functional ``1/2 sum (u - g)^2 h^k`` with ``u`` the zero-extended solve."""
    if not obj.f.value[omega.inside].any():
        u = ScalarField.zeros(omega.grid)
    else:
        u, _ = solve_dirichlet(omega, obj.A, obj.f, obj.pde_tol)
    J = 0.5 * float(np.sum((u.value - obj.g.value) ** 2)) * omega.grid.cell_volume
    return J, u


def support_confinement_check(u: ScalarField, omega: DomainMask, atol: float = 1e-14
                              ) -> tuple[bool, Optional[tuple[int, ...]]]:
    """``u`` vanishes on false cells away from the one-cell face collar of ``omega``."""
    if u.grid != omega.grid:
        raise GridMismatch("field and mask grids differ")
    closure = dilate(omega.inside, FACE)
    bad = ~closure & (np.abs(u.value) > atol)
    if bad.any():
        return False, tuple(int(v) for v in np.argwhere(bad)[0])
    return True, None


def _interface(inside: np.ndarray, margin: np.ndarray) -> np.ndarray:
    """Flat indices of cells on either side of a face between true and false."""
    grown = dilate(inside, FACE)
    shrunk = ~dilate(~inside, FACE)
    return np.flatnonzero(((grown & ~inside & ~margin) | (inside & ~shrunk)).ravel())


class _Chain:
    def __init__(self, obj, config, init, seed, rng, chain_id):
        self.obj = obj
        self.config = config
        self.params = config.params
        self.grid = init.grid
        self.margin = self.grid.margin()
        self.rng = rng
        self.chain_id = chain_id
        self.cache: dict[DomainMask, float] = {}
        self.mask = init
        self.seed = seed
        self.offsets = neighbor_offsets(self.grid.dim_count, "face+vertex")
        patch = np.array(np.meshgrid(*[[0, 1]] * self.grid.dim_count, indexing="ij"))
        self.patch = patch.reshape(self.grid.dim_count, -1).T

    def J(self, mask):
        hit = self.cache.get(mask)
        if hit is not None:
            return hit
        J, u = evaluate(mask, self.obj)
        if self.config.debug:
            assert check_membership(mask, self.params).member, "infeasible iterate"
            assert support_confinement_check(u, mask)[0]
            assert energy_check(u, mask, self.obj.A, self.obj.f, self.obj.pde_tol)
        self.cache[mask] = J
        return J

    def propose(self):
        move = MOVES[int(self.rng.choice(len(MOVES), p=self.config.move_mix))]
        inside = self.mask.inside.copy()
        seed = self.seed
        if move == "reanchor":
            off = self.offsets[int(self.rng.integers(len(self.offsets)))]
            cand = np.add(seed, off)
            if (cand > 0).all() and (cand < np.array(self.grid.shape) - 1).all():
                seed = tuple(int(v) for v in cand)
        else:
            cells = _interface(inside, self.margin)
            cell = np.array(self.grid.cell(int(cells[int(self.rng.integers(len(cells)))])))
            if move == "boundary_flip":
                targets = [cell]
            else:
                corner = cell - self.rng.integers(0, 2, self.grid.dim_count)
                targets = corner + self.patch
            for t in targets:
                t = tuple(int(v) for v in t)
                if not self.margin[t]:
                    inside[t] = not inside[t]
        return move, DomainMask(self.grid, inside), seed

    def run(self):
        cfg = self.config
        J_cur = self.J(self.mask)
        best_J, best_mask = J_cur, self.mask
        history = [(0, self.mask, J_cur)]
        T = cfg.initial_temperature
        records = [IterationRecord(0, "init", False, J_cur, True, T, best_J)]
        for it in range(1, cfg.budget + 1):
            failures = 0
            while True:
                move, cand, seed = self.propose()
                try:
                    repaired = repair_to_class(cand, self.params, seed)
                    break
                except RepairFailed as exc:
                    failures += 1
                    log.debug("chain %d iteration %d: %s", self.chain_id, it, exc)
                    if failures >= cfg.max_attempts:
                        raise RepairFailed(f"every proposal failed repair at iteration {it}")
            J_new = self.J(repaired)
            dJ = J_new - J_cur
            accept = dJ <= 0 or self.rng.random() < np.exp(-dJ / T)
            if accept:
                self.mask, self.seed, J_cur = repaired, seed, J_new
                if J_new < best_J:
                    best_J, best_mask = J_new, repaired
                    history.append((it, repaired, J_new))
            records.append(IterationRecord(it, move, repaired != cand, J_new, bool(accept), T,
                                           best_J, failures))
            T *= cfg.cooling
        return records, best_mask, best_J, history


def _initial_seed(init: DomainMask, params: ClassParams):
    if params.seed_hint is not None:
        return params.seed_hint
    return init.grid.cell(int(np.argmax(edt(init).sq.ravel())))


def _threads() -> int:
    import os
    raw = os.environ.get("CM_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParams(f"CM_THREADS must be a nonnegative integer, got {raw!r}") from None
    if n < 0:
        raise InvalidParams(f"CM_THREADS must be a nonnegative integer, got {raw!r}")
    return n or (os.cpu_count() or 1)


def optimize(obj: Objective, config: OptimizerConfig, init: DomainMask) -> OptTrace:
    """Anneal from ``init`` and return the trace of the best chain.

    Chains use independent streams spawned from ``config.rng_seed``; the
    winner is the lowest best value, then the lowest chain id.
    """
    if init.grid != obj.grid:
        raise GridMismatch("initial mask and objective grids differ")
    report = check_membership(init, config.params)
    if not report.member:
        raise InfeasibleInit(f"initial mask is not in the class: {report.to_dict()}")
    seed = _initial_seed(init, config.params)
    streams = np.random.SeedSequence(config.rng_seed).spawn(config.chains)

    def run(c):
        chain = _Chain(obj, config, init, seed, np.random.default_rng(streams[c]), c)
        return chain.run()

    if config.chains == 1:
        results = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=min(_threads(), config.chains)) as pool:
            results = list(pool.map(run, range(config.chains)))
    winner = min(range(config.chains), key=lambda c: (results[c][2], c))
    records, best_mask, best_J, history = results[winner]
    return OptTrace(tuple(records), best_mask, best_J, tuple(history), obj, config, winner,
                    tuple((c, results[c][2]) for c in range(config.chains)))


@dataclass(frozen=True)
class MinimizingSequenceReport:
    iterations: list
    values: list
    recomputed: list
    limit: float
    passed: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "values": self.values,
                "recomputed": self.recomputed, "limit": self.limit, "passed": self.passed}


def minimizing_sequence_report(trace: OptTrace) -> MinimizingSequenceReport:
    """Re-verify the strictly decreasing best values of a run.

    Checks that the records' running minimum matches the stored history,
    that every stored best mask is still a class member, and that re-solving
    reproduces each stored value within ``10 * pde_tol`` relative.
    """
    obj, params = trace.objective, trace.config.params
    running = []
    best = np.inf
    for r in trace.records:
        if r.accepted and r.J < best:
            best = r.J
            running.append((r.iteration, r.J))
        if r.best_J != best:
            raise TraceCorrupt(f"iteration {r.iteration}: recorded best {r.best_J!r} "
                               f"disagrees with running minimum {best!r}")
    stored = [(it, J) for it, _, J in trace.best_history]
    if running != stored:
        raise TraceCorrupt("decreasing subsequence of accepted values does not match the history")
    if not trace.best_history or trace.best_history[-1][2] != trace.best_J:
        raise TraceCorrupt("best value is not the limit of the decreasing subsequence")
    recomputed = []
    for it, mask, J in trace.best_history:
        if not check_membership(mask, params).member:
            raise TraceCorrupt(f"stored best mask at iteration {it} is not a class member")
        J2, _ = evaluate(mask, obj)
        if abs(J2 - J) > 10 * obj.pde_tol * max(abs(J), abs(J2)):
            raise TraceCorrupt(f"iteration {it}: stored J {J!r} but re-solve gives {J2!r}")
        recomputed.append(J2)
    return MinimizingSequenceReport([it for it, _ in stored], [J for _, J in stored], recomputed,
                                    trace.best_J)

