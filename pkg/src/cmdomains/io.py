"""Text formats for masks and fields, JSON run configuration and report helpers.

Mask file::

    CMMASK <k>
    <n_1> ... <n_k>
    <spacing> <origin_1> ... <origin_k>
    <rows of 0/1, last axis fastest, one row per line>

Field file: same three header lines with ``CMFIELD``, then whitespace
separated decimals in the same order, written with 17 significant digits.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elliptic import EllipticCoefficients, ScalarField
from .errors import FormatError, InvalidGrid, MissingKey, UnknownKey
from .grid import DomainMask, GridSpec

SCHEMA_VERSION = 1


def _read_text(path) -> list[str]:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"file is not UTF-8 text ({exc.reason})") from None
    return text.splitlines()


def _header(lines: list[str], magic: str) -> tuple[GridSpec, int]:
    if len(lines) < 3:
        raise FormatError("truncated header", line=len(lines) + 1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != magic:
        raise FormatError(f"expected '{magic} <k>'", line=1, column=1)
    try:
        k = int(head[1])
    except ValueError:
        raise FormatError(f"dimension {head[1]!r} is not an integer", line=1, column=len(magic) + 2)
    if k < 2:
        raise FormatError(f"dimension must be at least 2, got {k}", line=1)
    dims = lines[1].split()
    if len(dims) != k:
        raise FormatError(f"header declares {k} axes but {len(dims)} sizes are listed", line=2)
    try:
        shape = tuple(int(d) for d in dims)
    except ValueError:
        raise FormatError("axis sizes must be integers", line=2) from None
    geo = lines[2].split()
    if len(geo) != k + 1:
        raise FormatError(f"expected spacing and {k} origin coordinates", line=3)
    try:
        nums = [float(v) for v in geo]
    except ValueError:
        raise FormatError("spacing/origin must be decimal numbers", line=3) from None
    if not all(math.isfinite(v) for v in nums):
        raise FormatError("spacing/origin must be finite", line=3)
    try:
        grid = GridSpec(shape, nums[0], tuple(nums[1:]))
    except InvalidGrid as exc:
        raise FormatError(str(exc), line=2) from None
    return grid, 3


def _fmt(x: float) -> str:
    return repr(float(x))


def _grid_header(magic: str, grid: GridSpec) -> list[str]:
    return [f"{magic} {grid.dim_count}",
            " ".join(str(n) for n in grid.shape),
            " ".join(_fmt(v) for v in (grid.spacing,) + grid.origin)]


def parse_mask(path) -> DomainMask:
    lines = _read_text(path)
    grid, start = _header(lines, "CMMASK")
    body = lines[start:]
    while body and not body[-1].strip():
        body.pop()
    width = grid.shape[-1]
    nrows = grid.size // width
    if len(body) != nrows:
        raise FormatError(f"expected {nrows} rows of cells, found {len(body)}",
                          line=start + min(len(body), nrows) + 1)
    rows = np.zeros((nrows, width), bool)
    for r, line in enumerate(body):
        line = line.rstrip("\r")
        if len(line) != width:
            raise FormatError(f"row has {len(line)} cells, expected {width}", line=start + r + 1)
        for c, ch in enumerate(line):
            if ch == "1":
                rows[r, c] = True
            elif ch != "0":
                raise FormatError(f"unexpected character {ch!r}", line=start + r + 1, column=c + 1)
    return DomainMask(grid, rows.reshape(grid.shape))


def emit_mask(mask: DomainMask, path) -> None:
    grid = mask.grid
    rows = mask.inside.reshape(-1, grid.shape[-1])
    body = ["".join("1" if v else "0" for v in row) for row in rows]
    Path(path).write_text("\n".join(_grid_header("CMMASK", grid) + body) + "\n", encoding="utf-8")


def parse_field(path) -> ScalarField:
    lines = _read_text(path)
    grid, start = _header(lines, "CMFIELD")
    values = []
    for ln, line in enumerate(lines[start:], start=start + 1):
        for tok in line.split():
            try:
                v = float(tok)
            except ValueError:
                raise FormatError(f"value {tok!r} is not a number", line=ln) from None
            if not math.isfinite(v):
                raise FormatError(f"non-finite value {tok!r}", line=ln)
            values.append(v)
            if len(values) > grid.size:
                raise FormatError(f"more than {grid.size} values", line=ln)
    if len(values) != grid.size:
        raise FormatError(f"expected {grid.size} values, found {len(values)}", line=len(lines))
    return ScalarField(grid, np.array(values).reshape(grid.shape))


def emit_field(fld: ScalarField, path) -> None:
    grid = fld.grid
    rows = fld.value.reshape(-1, grid.shape[-1])
    body = [" ".join(format(float(v), ".17g") for v in row) for row in rows]
    Path(path).write_text("\n".join(_grid_header("CMFIELD", grid) + body) + "\n", encoding="utf-8")


def parse_coefficients(path, grid: GridSpec) -> EllipticCoefficients:
    """Constant coefficient matrix from JSON ``{"matrix": [[...]], "alpha": a}``.

    ``alpha`` defaults to the smallest eigenvalue of ``matrix``.
    """
    data = _load_json(path)
    if not isinstance(data, dict):
        raise FormatError("coefficient file must hold a JSON object")
    _check_keys(data, required={"matrix"}, optional={"alpha"})
    try:
        matrix = np.array(data["matrix"], dtype=float)
        alpha = None if data.get("alpha") is None else float(data["alpha"])
    except (TypeError, ValueError):
        raise FormatError("matrix/alpha must be numeric") from None
    if matrix.shape != (grid.dim_count, grid.dim_count):
        raise FormatError(f"matrix must be {grid.dim_count}x{grid.dim_count}")
    if not np.isfinite(matrix).all():
        raise FormatError("matrix entries must be finite")
    return EllipticCoefficients.constant(grid, matrix, alpha)


def emit_coefficients(matrix, path, alpha=None) -> None:
    data = {"matrix": np.asarray(matrix, float).tolist()}
    if alpha is not None:
        data["alpha"] = float(alpha)
    Path(path).write_text(json.dumps(data) + "\n", encoding="utf-8")


def parse_manifest(path) -> list[Path]:
    """Mask paths listed one per line (``#`` comments), relative to the manifest."""
    base = Path(path).parent
    out = []
    for ln, line in enumerate(_read_text(path), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        p = Path(line)
        out.append(p if p.is_absolute() else base / p)
    if not out:
        raise FormatError("manifest lists no mask files")
    return out


def _load_json(path):
    lines = _read_text(path)
    try:
        return json.loads("\n".join(lines), parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None


def _reject_constant(name):
    raise FormatError(f"non-finite JSON constant {name}")


def _check_keys(data: dict, required: set, optional: set) -> None:
    unknown = sorted(set(data) - required - optional)
    if unknown:
        raise UnknownKey(f"unknown key(s): {', '.join(unknown)}")
    missing = sorted(required - set(data))
    if missing:
        raise MissingKey(f"missing required key(s): {', '.join(missing)}")


# keys per subcommand: (required inputs, optional inputs, outputs, required numbers, optional numbers)
_SCHEMA = {
    "check": ({"mask"}, set(), set(), {"M", "R"}, {"witnesses", "seed"}),
    "dist": ({"a", "b"}, set(), set(), set(), {"complement"}),
    "converge": ({"manifest"}, set(), {"limit_out"}, {"tol"}, {"M", "R"}),
    "solve": ({"mask", "f", "coeff"}, set(), {"out"}, {"tol"}, set()),
    "optimize": ({"mask", "f"}, {"coeff", "g", "target_mask"},
                 {"out_mask", "trace_out", "summary_out"}, {"M", "R"},
                 {"pde_tol", "budget", "initial_temperature", "cooling", "move_mix",
                  "rng_seed", "chains", "seed_hint", "max_attempts"}),
}
_REQUIRED_OUTPUTS = {"solve": {"out"}, "optimize": {"out_mask"}}


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)


def parse_config(source, subcommand: str | None = None, base=None) -> RunConfig:
    """Validate a run configuration given as a dict or a JSON file path.

    Paths are resolved against ``base`` (the config file's directory by
    default).  Input files must exist; unknown keys are rejected.
    """
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        data = _load_json(path)
        base = path.parent if base is None else base
    else:
        data = dict(source)
    if not isinstance(data, dict):
        raise FormatError("configuration must be a JSON object")
    if subcommand is None:
        subcommand = data.pop("subcommand", None)
        if subcommand is None:
            raise MissingKey("missing required key(s): subcommand")
    if subcommand not in _SCHEMA:
        raise UnknownKey(f"unknown subcommand {subcommand!r}")
    req_in, opt_in, outs, req_num, opt_num = _SCHEMA[subcommand]
    data = {k: v for k, v in data.items() if v is not None}
    _check_keys(data, required=req_in | req_num | _REQUIRED_OUTPUTS.get(subcommand, set()),
                optional=opt_in | outs | opt_num)
    if subcommand == "optimize" and not ({"g", "target_mask"} & set(data)):
        raise MissingKey("missing required key(s): g or target_mask")
    base = Path(base) if base is not None else Path(".")
    cfg = RunConfig(subcommand)
    for key in req_in | opt_in:
        if key in data:
            p = Path(data[key]) if isinstance(data[key], (str, os.PathLike)) else None
            if p is None:
                raise FormatError(f"{key} must be a path")
            p = p if p.is_absolute() else base / p
            if not p.is_file():
                raise FileNotFoundError(f"{key}: no such file {str(p)!r}")
            cfg.inputs[key] = p
    for key in outs:
        if key in data:
            if not isinstance(data[key], (str, os.PathLike)):
                raise FormatError(f"{key} must be a path")
            p = Path(data[key])
            cfg.outputs[key] = p if p.is_absolute() else base / p
    for key in req_num | opt_num:
        if key in data:
            cfg.options[key] = _number(key, data[key])
    return cfg


_INT_KEYS = {"witnesses", "seed", "budget", "rng_seed", "chains", "max_attempts"}


def _number(key, value):
    if key == "complement":
        if not isinstance(value, bool):
            raise FormatError("complement must be true or false")
        return value
    if key == "move_mix":
        if not isinstance(value, dict) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value.values()):
            raise FormatError("move_mix must map move names to probabilities")
        return {str(k): float(v) for k, v in value.items()}
    if key == "seed_hint":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                                  for v in value):
            raise FormatError("seed_hint must be a list of integers")
        return tuple(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{key} must be a number")
    if not math.isfinite(value):
        raise FormatError(f"{key} must be finite")
    if key in _INT_KEYS:
        if int(value) != value:
            raise FormatError(f"{key} must be an integer")
        return int(value)
    return float(value)


def report_json(command: str, payload: dict) -> str:
    from . import __version__
    doc = {"schema_version": SCHEMA_VERSION, "version": __version__, "command": command}
    doc.update(payload)
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
