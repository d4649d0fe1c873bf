"""Command-line front end.

Exit codes: 0 when the run succeeds and the checked property holds, 1 when
the property is violated (non-member, no recurring mask, infeasible start,
solver failure), 2 for bad input or usage.  Reports go to standard output as
JSON; diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .cm_class import ClassParams, check_membership
from .convergence import DomainSequence, select_convergent
from .elliptic import EllipticCoefficients, energy_check, solve_dirichlet
from .errors import CMError, InfeasibleInit, NoConvergence, RepairFailed
from .grid import CompactSet
from .io import (emit_field, emit_mask, parse_coefficients, parse_config, parse_field,
                 parse_manifest, parse_mask, report_json)
from .metrics import delta, rho
from .shape_opt import Objective, OptimizerConfig, evaluate, optimize

PROPERTY_FAILURES = (InfeasibleInit, NoConvergence, RepairFailed)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cmdomains", description="Domain-class checks, metrics, "
                "convergence, elliptic solves and shape optimization on grid masks.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    c = sub.add_parser("check", help="class membership of a mask")
    c.add_argument("--mask", required=True)
    c.add_argument("--M", type=float)
    c.add_argument("--R", type=float)
    c.add_argument("--witnesses", type=int, help="number of random tube witnesses to report")
    c.add_argument("--seed", type=int, help="seed for witness pairs")

    d = sub.add_parser("dist", help="Hausdorff distance of two masks")
    d.add_argument("--a", required=True)
    d.add_argument("--b", required=True)
    d.add_argument("--complement", action="store_true",
                   help="compare the closed complements instead of the cell sets")

    v = sub.add_parser("converge", help="select a convergent subsequence")
    v.add_argument("--manifest", required=True)
    v.add_argument("--tol", type=float)
    v.add_argument("--limit-out", dest="limit_out")
    v.add_argument("--M", type=float)
    v.add_argument("--R", type=float)

    s = sub.add_parser("solve", help="Dirichlet problem on a mask")
    s.add_argument("--mask", required=True)
    s.add_argument("--f", required=True)
    s.add_argument("--coeff", required=True)
    s.add_argument("--tol", type=float)
    s.add_argument("--out", required=True)

    o = sub.add_parser("optimize", help="anneal toward a target field")
    o.add_argument("--config", required=True)
    return p


def _config_from_args(args):
    if args.command == "optimize":
        return parse_config(args.config, "optimize")
    data = {k: v for k, v in vars(args).items() if k != "command"}
    if args.command == "dist":
        data["complement"] = bool(data["complement"])
    return parse_config(data, args.command, base=Path.cwd())


def _params(opts) -> ClassParams | None:
    if "M" not in opts and "R" not in opts:
        return None
    if "M" not in opts or "R" not in opts:
        raise _UsageError("M and R must be given together")
    return ClassParams(opts["M"], opts["R"], opts.get("seed_hint"))


def _run_check(cfg, out):
    omega = parse_mask(cfg.inputs["mask"])
    params = ClassParams(cfg.options["M"], cfg.options["R"])
    report = check_membership(omega, params, cfg.options.get("witnesses", 0),
                              cfg.options.get("seed", 0))
    out.write(report_json("check", {"M": params.M, "R": params.R, "report": report.to_dict()}))
    return 0 if report.member else 1


def _run_dist(cfg, out):
    a = parse_mask(cfg.inputs["a"])
    b = parse_mask(cfg.inputs["b"])
    complement = cfg.options.get("complement", False)
    if complement:
        rep = rho(a, b)
    else:
        rep = delta(CompactSet.from_indicator(a.grid, a.inside),
                    CompactSet.from_indicator(b.grid, b.inside))
    payload = rep.to_dict()
    payload["complement"] = complement
    out.write(report_json("dist", payload))
    return 0


def _run_converge(cfg, out):
    masks = [parse_mask(p) for p in parse_manifest(cfg.inputs["manifest"])]
    seq = DomainSequence(masks)
    report = select_convergent(seq, cfg.options["tol"], _params(cfg.options))
    if "limit_out" in cfg.outputs:
        emit_mask(report.limit, cfg.outputs["limit_out"])
    out.write(report_json("converge", {"report": report.to_dict()}))
    bad_limit = report.limit_membership is not None and not report.limit_membership.member
    return 1 if report.degenerate or bad_limit else 0


def _run_solve(cfg, out):
    omega = parse_mask(cfg.inputs["mask"])
    f = parse_field(cfg.inputs["f"])
    A = parse_coefficients(cfg.inputs["coeff"], omega.grid)
    tol = cfg.options["tol"]
    u, rep = solve_dirichlet(omega, A, f, tol)
    emit_field(u, cfg.outputs["out"])
    passed = energy_check(u, omega, A, f, tol)
    out.write(report_json("solve", {
        "iterations": rep.iterations, "relative_residual": rep.relative_residual,
        "dirichlet_energy": rep.dirichlet_energy, "load_pairing": rep.load_pairing,
        "energy_check": passed}))
    return 0 if passed else 1


def _run_optimize(cfg, out):
    opts = cfg.options
    init = parse_mask(cfg.inputs["mask"])
    f = parse_field(cfg.inputs["f"])
    A = (parse_coefficients(cfg.inputs["coeff"], init.grid) if "coeff" in cfg.inputs
         else EllipticCoefficients.identity(init.grid))
    pde_tol = opts.get("pde_tol", 1e-10)
    if "g" in cfg.inputs:
        g = parse_field(cfg.inputs["g"])
    else:
        # inverse crime: the target is the zero-extended solve on a known domain
        target = parse_mask(cfg.inputs["target_mask"])
        g, _ = solve_dirichlet(target, A, f, pde_tol)
    obj = Objective(g, f, A, pde_tol)
    config = OptimizerConfig(
        _params(opts),
        **{k: opts[k] for k in ("budget", "initial_temperature", "cooling", "move_mix",
                                "rng_seed", "chains", "max_attempts") if k in opts})
    trace = optimize(obj, config, init)
    emit_mask(trace.best_mask, cfg.outputs["out_mask"])
    trace_path = cfg.outputs.get("trace_out",
                                 cfg.outputs["out_mask"].with_suffix(".trace.jsonl"))
    with open(trace_path, "w", encoding="utf-8") as fh:
        for r in trace.records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    summary = trace.summary()
    summary["initial_J"] = evaluate(init, obj)[0]
    text = report_json("optimize", {"summary": summary})
    if "summary_out" in cfg.outputs:
        Path(cfg.outputs["summary_out"]).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return 0


_RUNNERS = {"check": _run_check, "dist": _run_dist, "converge": _run_converge,
            "solve": _run_solve, "optimize": _run_optimize}


def _fail(err, code, kind, message):
    err.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    logging.basicConfig(level=logging.WARNING, stream=err, format="%(levelname)s %(message)s")
    try:
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as exc:      # --help
            return int(exc.code or 0)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        cfg = _config_from_args(args)
        return _RUNNERS[cfg.subcommand](cfg, out)
    except PROPERTY_FAILURES as exc:
        return _fail(err, 1, type(exc).__name__, str(exc))
    except _UsageError as exc:
        return _fail(err, 2, "UsageError", str(exc))
    except (CMError, KeyError) as exc:
        return _fail(err, 2, type(exc).__name__, str(exc))
    except (OSError, ValueError, TypeError, OverflowError, MemoryError) as exc:
        return _fail(err, 2, type(exc).__name__, str(exc))


def entry() -> None:
    sys.exit(main())
