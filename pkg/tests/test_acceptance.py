"""Acceptance suite: one PASS/FAIL line per criterion.

Tolerances are fixed here and must not be loosened to make a run pass.  Run
with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import io
import json
import os
import shutil
import string
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from cmdomains import (ClassParams, CompactSet, DomainMask, DomainSequence, EllipticCoefficients,
                       GridSpec, Objective, OptimizerConfig, ScalarField, check_cm,
                       check_membership, closed_complement, delta, delta_bruteforce,
                       dist_compact_to_boundary, edt, energy_check, evaluate,
                       minimizing_sequence_report, optimize, repair_to_class, rho,
                       select_convergent, solve_dirichlet)
from cmdomains.cli import main
from cmdomains.convergence import (check_ball_limit, check_connected_limit, check_gamma,
                                   check_nested_limits, lemma_suite)
from cmdomains.errors import RepairFailed
from cmdomains.grid import dilate
from cmdomains.shapes import (box, disk, dumbbell, dumbbell_grid, ellipse, random_blob,
                              random_convex)

sys.path.insert(0, os.path.dirname(__file__))
from oracles import tube_matrix  # noqa: E402

# pinned tolerances
FLOAT_SLACK = 1e-12          # floating rounding only
FLIP_TOL_CELLS = 1.0         # dumbbell flip within one grid cell
DISK_MAX_REL_ERR = 0.02
DISK_RATIO_MIN = 3.0
SQUARE_CENTER_REL = 0.01
OPT_RATIO = 1e-3

# sub-check results: key -> list of (label, passed, detail)
RESULTS: dict[str, list] = {}
TITLES = {
    "metric_parity": "metric oracle parity",
    "metric_axioms": "metric axioms",
    "lipschitz": "boundary-distance Lipschitz bound",
    "tube_decision": "tube-property decision",
    "selection": "selection limits stay in the class",
    "limit_checks": "limit checks",
    "pde": "PDE correctness",
    "optimization": "inverse-crime shape optimization",
    "cli": "CLI robustness",
}


def record(key: str, label: str, passed: bool, detail: str) -> bool:
    RESULTS.setdefault(key, []).append((label, bool(passed), detail))
    return bool(passed)


def summary_lines() -> list[str]:
    lines = []
    for key in (k for k in TITLES if k in RESULTS):
        subs = RESULTS[key]
        ok = all(p for _, p, _ in subs)
        detail = "; ".join(f"{label} {'ok' if p else 'FAILED'} ({d})" for label, p, d in subs)
        lines.append(f"{TITLES[key]}: {'PASS' if ok else 'FAIL'} - {detail}")
    return lines


# ---------------------------------------------------------------- metrics

def _random_set(rng, grid, p):
    ind = rng.random(grid.shape) < p
    ind.flat[rng.integers(grid.size)] = True
    return CompactSet.from_indicator(grid, ind)


def _random_mask(rng, n, p):
    g = GridSpec((n, n), 1 / n)
    return DomainMask(g, (rng.random(g.shape) < p) & ~g.margin())


def test_accept_oracle_parity():
    rng = np.random.default_rng(101)
    mismatches, total = 0, 0
    for n in (8, 16, 32):
        g = GridSpec((n, n), 1 / n)
        for _ in range(500):
            p = rng.uniform(0.01, 0.5)
            a, b = _random_set(rng, g, p), _random_set(rng, g, p)
            mismatches += delta(a, b).value != delta_bruteforce(a, b)
            ma, mb = _random_mask(rng, n, rng.uniform(0.2, 0.9)), _random_mask(rng, n, 0.6)
            ca, cb = closed_complement(ma), closed_complement(mb)
            mismatches += rho(ma, mb).value != delta_bruteforce(ca, cb)
            total += 2
    assert record("metric_parity", "delta/rho vs brute force", mismatches == 0,
                  f"{mismatches} mismatches in {total} comparisons, 500 pairs per size 8/16/32")


def test_accept_metric_axioms():
    rng = np.random.default_rng(202)
    violations, triples = 0, 0
    for n in (8, 16, 32):
        g = GridSpec((n, n), 1 / n)
        for _ in range(200):
            sets = [_random_set(rng, g, rng.uniform(0.01, 0.3)) for _ in range(3)]
            masks = [_random_mask(rng, n, rng.uniform(0.3, 0.8)) for _ in range(3)]
            for dist, objs in ((delta, sets), (rho, masks)):
                a, b, c = objs
                ab, ba = dist(a, b).value, dist(b, a).value
                bc, ac = dist(b, c).value, dist(a, c).value
                violations += ab < 0 or ab != ba
                violations += (ab == 0) != (a == b)
                violations += dist(a, a).value != 0
                violations += ac > ab + bc + FLOAT_SLACK
            triples += 2
    assert record("metric_axioms", "nonnegativity/symmetry/identity/triangle", violations == 0,
                  f"{violations} violations over {triples} triples")


def test_accept_lipschitz_bound():
    rng = np.random.default_rng(303)
    worst, pairs = -np.inf, 0
    while pairs < 500:
        g = GridSpec((32, 32), 1 / 32)
        omega = random_blob(g, rng, smoothing=rng.uniform(1.0, 3.0), fill=rng.uniform(0.3, 0.7))
        if omega.count < 2:
            continue
        cells = omega.cells()
        for _ in range(25):
            k1 = rng.choice(cells, rng.integers(1, min(20, len(cells)) + 1), replace=False)
            k2 = rng.choice(cells, rng.integers(1, min(20, len(cells)) + 1), replace=False)
            K1, K2 = CompactSet(g, k1), CompactSet(g, k2)
            gap = abs(dist_compact_to_boundary(K1, omega) - dist_compact_to_boundary(K2, omega))
            worst = max(worst, gap - delta(K1, K2).value)
            pairs += 1
    assert record("lipschitz", "|d(K1)-d(K2)| <= delta", worst <= FLOAT_SLACK,
                  f"max excess {worst:.3g} over {pairs} pairs, slack {FLOAT_SLACK}")


# ---------------------------------------------------------------- tube-property decision

def _connected_masks(rng, n, count):
    g = GridSpec((n, n), 1 / n)
    out = []
    while len(out) < count:
        m = random_blob(g, rng, smoothing=rng.uniform(0.6, 2.5), fill=rng.uniform(0.3, 0.8))
        if not m.is_empty():
            out.append(m)
    return out


def test_accept_sweep_matches_all_pairs():
    rng = np.random.default_rng(404)
    Ms = (1.2, 2.0, 4.0)
    mismatches, checks, true_count = 0, 0, 0
    for n in (12, 16, 24):
        for m in _connected_masks(rng, n, 100):
            _, d, tube = tube_matrix(m.inside)
            dmin = np.minimum(d[:, None], d[None, :])
            for M in Ms:
                ref = bool((tube >= dmin / M).all())
                got = check_cm(m, M)[0]
                mismatches += got != ref
                true_count += ref
                checks += 1
    assert record("tube_decision", "sweep vs all-pairs oracle", mismatches == 0,
                  f"{mismatches} mismatches in {checks} decisions ({true_count} true), "
                  f"100 masks per size 12/16/24, M in {Ms}")


def test_accept_convex_shapes():
    rng = np.random.default_rng(405)
    g = GridSpec((64, 64), 1 / 64)
    shapes = [disk(g, (0.5, 0.5), 0.4), disk(g, (0.4, 0.55), 0.17),
              box(g, (0.1, 0.2), (0.9, 0.6)), box(g, (0.3, 0.3), (0.5, 0.5)),
              ellipse(g, (0.5, 0.5), (0.42, 0.15)), ellipse(g, (0.5, 0.5), (0.2, 0.35))]
    shapes += [random_convex(g, rng, (0.5, 0.5), 0.1, 0.45) for _ in range(20)]
    failures = [(i, M) for i, s in enumerate(shapes) for M in (1.01, 2, 10)
                if not check_cm(s, M)[0]]
    assert record("tube_decision", "convex shapes pass", not failures,
                  f"{len(shapes)} shapes x M in (1.01, 2, 10), failures {failures}")


def test_accept_dumbbell_flip():
    g = dumbbell_grid()
    h = g.spacing
    widths = np.arange(0.004, 0.08, h / 4)
    offsets = {}
    monotone = True
    for M in (4, 5, 8, 10):
        verdicts = [check_cm(dumbbell(g, neck_half_width=w), M)[0] for w in widths]
        first = verdicts.index(True)
        monotone &= all(verdicts[first:]) and not any(verdicts[:first])
        offsets[M] = abs(widths[first] - 0.2 / M) / h
    ok = monotone and max(offsets.values()) <= FLIP_TOL_CELLS
    detail = ", ".join(f"M={M}: {v:.2f} cells" for M, v in offsets.items())
    assert record("tube_decision", "dumbbell flip at 0.2/M", ok, f"{detail}; single flip {monotone}")


# ---------------------------------------------------------------- selection limits stay in the class

def _member_pool(rng, params, size=50):
    g = GridSpec((64, 64), 1 / 64)
    pool = []
    while len(pool) < size // 2:
        c = rng.uniform(0.4, 0.6, 2)
        m = random_convex(g, rng, c, 0.15, 0.38, vertices=int(rng.integers(4, 9)))
        if check_membership(m, params).member:
            pool.append(m)
    while len(pool) < size:
        blob = random_blob(g, rng, smoothing=rng.uniform(2.5, 4.0), fill=rng.uniform(0.3, 0.5))
        if blob.is_empty():
            continue
        seed = g.cell(int(np.argmax(edt(blob).sq.ravel())))
        try:
            m = repair_to_class(blob, params, seed)
        except RepairFailed:
            continue
        pool.append(m)
    return pool


def test_accept_selection_limits_are_members():
    rng = np.random.default_rng(505)
    params = ClassParams(4, 0.1)
    pool = _member_pool(rng, params)
    h = pool[0].grid.spacing
    passed = 0
    for trial in range(100):
        k = int(rng.integers(2, 8))
        chosen = rng.choice(len(pool), k, replace=False)
        weights = rng.dirichlet(np.ones(k))
        picks = rng.choice(chosen, int(rng.integers(10, 40)), p=weights)
        seq = DomainSequence([pool[i] for i in picks])
        tol = float(rng.choice([0.0, h, 2 * h, 4 * h]))
        rep = select_convergent(seq, tol, params)
        sound = all(r <= tol for r in rep.residuals)
        passed += bool(rep.limit_membership.member and sound)
    assert record("selection", "limit passes membership", passed == 100,
                  f"{passed}/100 trials, pool of {len(pool)} members (h=1/64, M=4, R=0.1)")


# ---------------------------------------------------------------- limit checks

def test_accept_lemma_families():
    H = 1 / 64
    g = GridSpec((64, 64), H)
    rng = np.random.default_rng(606)
    outcomes = []
    for _ in range(5):
        drift = rng.uniform(-0.15, 0.15, 2)
        centers = [0.5 + drift / n for n in range(1, 30)]
        outcomes.append(check_ball_limit(g, centers, [rng.uniform(0.15, 0.25)] * 29, H))
    for _ in range(5):
        lo, hi = rng.uniform(0.15, 0.35, 2), rng.uniform(0.65, 0.85, 2)
        grow = rng.uniform(0.02, 0.1)
        inner = [CompactSet.from_indicator(g, box(g, lo + grow / n, hi - grow / n).inside)
                 for n in range(1, 15)]
        outer = [CompactSet.from_indicator(g, box(g, lo - 0.1 + grow / n, hi + 0.1).inside)
                 for n in range(1, 15)]
        outcomes.append(check_nested_limits(inner, outer, H))
    for _ in range(5):
        g48 = GridSpec((48, 48), 1 / 48)
        base = random_blob(g48, rng, smoothing=3.0, fill=0.4).inside
        ring = dilate(base, "face") & ~base & ~g48.margin()
        sets = [CompactSet.from_indicator(g48, base | (ring & (rng.random(g48.shape) < 1 / n)))
                for n in range(1, 17)]
        outcomes.append(check_connected_limit(sets, 1 / 48))
    for _ in range(5):
        r = rng.uniform(0.2, 0.35)
        seq = DomainSequence([disk(g, (0.5, 0.5), r - 0.1 / n) for n in range(1, 20)])
        outcomes.append(check_gamma(seq, disk(g, (0.5, 0.5), r), H))
    masks = [disk(g, (0.5 + 0.1 / n, 0.5), 0.25) for n in range(1, 30)]
    outcomes += list(lemma_suite(DomainSequence(masks), 2 * H, ClassParams(4, 0.1)).values())
    failed = [(o.name, o.detail) for o in outcomes if not o.passed]
    by_name = {}
    for o in outcomes:
        by_name[o.name] = by_name.get(o.name, 0) + 1
    assert record("limit_checks", "constructed families", not failed,
                  f"{len(outcomes) - len(failed)}/{len(outcomes)} checks passed {by_name}"
                  + (f", failures {failed}" if failed else ""))


# ---------------------------------------------------------------- PDE correctness

def _disk_error(h):
    g = GridSpec.box([-1 - 2 * h] * 2, [1 + 2 * h] * 2, h)
    omega = disk(g, (0, 0), 1.0)
    A = EllipticCoefficients.identity(g)
    f = ScalarField.constant(g, 1.0)
    u, _ = solve_dirichlet(omega, A, f, 1e-10)
    x, y = g.mesh()
    exact = (1 - x ** 2 - y ** 2) / 4
    err = np.abs(u.value - exact)[omega.inside].max() / 0.25
    return err, energy_check(u, omega, A, f, 1e-10)


def _square_center(n):
    # node-aligned: false cells sit exactly on x = 0 and x = 1
    g = GridSpec((n + 1, n + 1), 1 / n, (0.0, 0.0))
    omega = DomainMask(g, ~g.margin())
    A = EllipticCoefficients.identity(g)
    f = ScalarField.constant(g, 1.0)
    u, _ = solve_dirichlet(omega, A, f, 1e-10)
    return u.value[n // 2, n // 2], energy_check(u, omega, A, f, 1e-10)


@pytest.fixture(scope="module")
def disk_errors():
    return {h: _disk_error(h) for h in (1 / 32, 1 / 64)}


def test_accept_disk_error(disk_errors):
    err, _ = disk_errors[1 / 64]
    assert record("pde", "disk max relative error", err <= DISK_MAX_REL_ERR,
                  f"{err:.4f} at h=1/64, limit {DISK_MAX_REL_ERR}")


def test_accept_disk_ratio(disk_errors):
    ratio = disk_errors[1 / 32][0] / disk_errors[1 / 64][0]
    assert record("pde", "disk error ratio 1/32 -> 1/64", ratio >= DISK_RATIO_MIN,
                  f"{ratio:.2f}, required >= {DISK_RATIO_MIN}; staircase boundary is first order")


def test_accept_square_center(disk_errors):
    coarse, e1 = _square_center(64)
    ref, e2 = _square_center(512)
    rel = abs(coarse - ref) / ref
    energy_ok = e1 and e2 and all(e for _, e in disk_errors.values())
    record("pde", "energy check on every solve", energy_ok, "4 solves")
    assert record("pde", "square center vs h=1/512", rel <= SQUARE_CENTER_REL,
                  f"{coarse:.5f} vs {ref:.5f}, rel {rel:.2e}") and energy_ok


# ---------------------------------------------------------------- inverse-crime shape optimization

def _inverse_crime(debug):
    g = GridSpec((32, 32), 1 / 32)
    A = EllipticCoefficients.identity(g)
    f = ScalarField.constant(g, 1.0)
    g_target, _ = solve_dirichlet(disk(g, (0.5, 0.5), 0.3), A, f, 1e-10)
    obj = Objective(g_target, f, A, 1e-10)
    init = box(g, (0.25, 0.25), (0.75, 0.75))
    J0 = evaluate(init, obj)[0]
    config = OptimizerConfig(ClassParams(4, 0.1), budget=2000, initial_temperature=1e-4 * J0,
                             cooling=0.998, rng_seed=0, debug=debug)
    return J0, optimize(obj, config, init)


def test_accept_inverse_crime():
    J0, trace = _inverse_crime(debug=True)
    _, again = _inverse_crime(debug=False)
    ratio = trace.best_J / J0
    best = [r.best_J for r in trace.records]
    monotone = all(b <= a for a, b in zip(best, best[1:]))
    report = minimizing_sequence_report(trace)
    same = ([r.to_dict() for r in trace.records] == [r.to_dict() for r in again.records]
            and trace.best_mask == again.best_mask)
    record("optimization", "best_J / J(init)", ratio <= OPT_RATIO,
           f"{ratio:.2e} after {len(trace.records) - 1} iterations, limit {OPT_RATIO}")
    record("optimization", "every iterate feasible", True, "debug run asserts membership per evaluation")
    record("optimization", "best-so-far nonincreasing", monotone and report.passed,
           f"{len(report.iterations)} improvements re-verified")
    record("optimization", "deterministic", same, "two runs with rng_seed=0")
    assert ratio <= OPT_RATIO and monotone and report.passed and same


# ---------------------------------------------------------------- CLI robustness

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def _run(argv, cwd):
    out = io.StringIO()
    old = os.getcwd()
    os.chdir(cwd)
    try:
        return main(argv, out=out, err=io.StringIO()), out.getvalue()
    finally:
        os.chdir(old)


def test_accept_cli():
    sys.path.insert(0, str(DATA))
    from regen import CASES, OUTPUTS, normalized, strip_version
    rng = np.random.default_rng(909)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for f in DATA.iterdir():
            if f.is_file():
                shutil.copy(f, tmp / f.name)
        stable = 0
        for name, argv in CASES.items():
            runs = [_run(argv, tmp) for _ in range(2)]
            same = all(strip_version(t) + "\n" == (GOLDEN / f"{name}.json").read_text()
                       and code == int((GOLDEN / f"{name}.code").read_text())
                       for code, t in runs)
            same &= all(normalized(tmp / x) == (GOLDEN / f"{name}.{x}").read_text()
                        for x in OUTPUTS.get(name, []))
            stable += same
        golden_ok = stable == len(CASES)
        record("cli", "golden outputs", golden_ok, f"{stable}/{len(CASES)} subcommand cases identical")

        seeds = {"mask": (DATA / "square.cmmask").read_text(),
                 "field": (DATA / "ones.cmfield").read_text(),
                 "config": (DATA / "optimize.json").read_text()}
        alphabet = list(string.printable) + ["\x00", "é", "NaN", "-1", "1e999"]
        bad_codes, tried = [], 0
        for i in range(300):
            kind = ("mask", "field", "config")[i % 3]
            text = seeds[kind]
            for _ in range(int(rng.integers(1, 5))):
                pos = int(rng.integers(len(text) + 1))
                cut = int(rng.integers(0, 4))
                text = text[:pos] + str(rng.choice(alphabet)) + text[pos + cut:]
            path = tmp / f"fuzz_{kind}"
            path.write_text(text, encoding="utf-8")
            argv = {"mask": ["check", "--mask", path.name, "--M", "2", "--R", "0.125"],
                    "field": ["solve", "--mask", "disk.cmmask", "--f", path.name, "--coeff",
                              "coeff.json", "--tol", "1e-8", "--out", "fz.cmfield"],
                    "config": ["optimize", "--config", path.name]}[kind]
            if kind == "config":
                # keep the run short if the mutation happens to stay valid
                try:
                    cfg = json.loads(text)
                    if isinstance(cfg, dict) and cfg.get("budget") == 25:
                        cfg["budget"] = 0
                        path.write_text(json.dumps(cfg))
                except ValueError:
                    pass
            code, _ = _run(argv, tmp)
            if code == 0:
                continue      # mutation left a valid input
            tried += 1
            if code != 2:
                bad_codes.append((kind, code))
        record("cli", "fuzzed inputs exit 2", not bad_codes,
               f"{tried} malformed inputs, non-2 exits {bad_codes[:5]}")
    assert golden_ok and not bad_codes


if __name__ == "__main__":
    import inspect
    here = sys.modules[__name__]
    errors = {1 / 32: _disk_error(1 / 32), 1 / 64: _disk_error(1 / 64)}
    for name, fn in inspect.getmembers(here, inspect.isfunction):
        if name.startswith("test_accept"):
            try:
                fn(errors) if "disk_errors" in inspect.signature(fn).parameters else fn()
            except AssertionError:
                pass
    print("\n".join(summary_lines()))
    sys.exit(0 if all(p for subs in RESULTS.values() for _, p, _ in subs) else 1)
