import io
import json
import os
import shutil
import string
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import assume, given, strategies as st

from cmdomains.cli import main
from cmdomains.io import parse_field, parse_mask

HERE = Path(__file__).parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"
sys.path.insert(0, str(DATA))
from regen import CASES, OUTPUTS, normalized, run_case, strip_version  # noqa: E402


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    where = tmp_path_factory.mktemp("cli")
    for f in DATA.iterdir():
        if f.is_file():
            shutil.copy(f, where / f.name)
    return where


def run(argv, cwd):
    out, err = io.StringIO(), io.StringIO()
    old = os.getcwd()
    os.chdir(cwd)
    try:
        code = main(argv, out=out, err=err)
    finally:
        os.chdir(old)
    return code, out.getvalue(), err.getvalue()


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(workdir, name):
    code, text = run_case(name, workdir)
    assert code == int((GOLDEN / f"{name}.code").read_text())
    assert strip_version(text) + "\n" == (GOLDEN / f"{name}.json").read_text()
    for extra in OUTPUTS.get(name, []):
        assert normalized(workdir / extra) == (GOLDEN / f"{name}.{extra}").read_text()


def test_reports_carry_schema_version(workdir):
    code, text, _ = run(CASES["dist"], workdir)
    doc = json.loads(text)
    assert doc["schema_version"] == 1 and "version" in doc and code == 0
    assert set(doc) >= {"value", "forward", "backward"}


def test_check_disk_exit_zero(workdir):
    assert run(["check", "--mask", "disk.cmmask", "--M", "2", "--R", "0.125"], workdir)[0] == 0


def test_check_dumbbell_exit_one(workdir):
    code, text, _ = run(CASES["check_dumbbell"], workdir)
    assert code == 1
    assert json.loads(text)["report"]["failing_pair"] is not None


def test_dist_mismatched_grids(workdir):
    code, text, err = run(["dist", "--a", "disk.cmmask", "--b", "dumbbell.cmmask"], workdir)
    assert code == 2 and text == "" and json.loads(err)["error"] == "GridMismatch"


def test_outputs_parse_back(workdir):
    run(CASES["solve"], workdir)
    assert parse_field(workdir / "u.cmfield").grid == parse_mask(workdir / "disk.cmmask").grid


def test_converge_degenerate_exit_one(workdir):
    (workdir / "distinct.txt").write_text("seq0.cmmask\nseq1.cmmask\nseq2.cmmask\n")
    assert run(["converge", "--manifest", "distinct.txt", "--tol", "0"], workdir)[0] == 1


def test_optimize_infeasible_exit_one(workdir):
    cfg = json.loads((workdir / "optimize.json").read_text())
    cfg["mask"] = "seq0.cmmask"
    cfg["M"] = 1.01
    cfg["R"] = 0.45
    (workdir / "bad_opt.json").write_text(json.dumps(cfg))
    code, _, err = run(["optimize", "--config", "bad_opt.json"], workdir)
    assert code == 1 and json.loads(err)["error"] == "InfeasibleInit"


@pytest.mark.parametrize("argv", [
    [], ["frobnicate"], ["check"], ["check", "--mask", "disk.cmmask", "--M", "2"],
    ["check", "--mask", "disk.cmmask", "--M", "x", "--R", "0.1"],
    ["check", "--mask", "missing.cmmask", "--M", "2", "--R", "0.125"],
    ["check", "--mask", "disk.cmmask", "--M", "0.5", "--R", "0.125"],
    ["check", "--mask", "disk.cmmask", "--M", "2", "--R", "0.01"],
    ["check", "--mask", "disk.cmmask", "--M", "nan", "--R", "0.125"],
    ["dist", "--a", "disk.cmmask"],
    ["converge", "--manifest", "sequence.txt", "--tol", "-1"],
    ["converge", "--manifest", "sequence.txt", "--tol", "0.1", "--M", "2"],
    ["solve", "--mask", "disk.cmmask", "--f", "load.cmfield", "--coeff", "coeff.json",
     "--tol", "2", "--out", "u2.cmfield"],
    ["solve", "--mask", "disk.cmmask", "--f", "disk.cmmask", "--coeff", "coeff.json",
     "--tol", "1e-8", "--out", "u2.cmfield"],
    ["optimize", "--config", "disk.cmmask"],
    ["optimize", "--config", "coeff.json"],
])
def test_usage_errors_exit_two(workdir, argv):
    code, text, err = run(argv, workdir)
    assert code == 2, err
    assert text == ""
    json.loads(err.splitlines()[-1])


def test_console_script(workdir):
    proc = subprocess.run([sys.executable, "-m", "cmdomains", "dist", "--a", "disk.cmmask",
                           "--b", "square.cmmask"], cwd=workdir, capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["command"] == "dist"


def test_thread_env_error(workdir, monkeypatch):
    monkeypatch.setenv("CM_THREADS", "-3")
    code, _, err = run(CASES["optimize"], workdir)
    assert code == 2 and "CM_THREADS" in err


# fuzzing: every malformed input must map to exit code 2

VALID_MASK = (DATA / "square.cmmask").read_text()
VALID_FIELD = (DATA / "ones.cmfield").read_text()
VALID_CONFIG = json.loads((DATA / "optimize.json").read_text())


def mutate(text, data):
    ops = data.draw(st.lists(st.tuples(st.integers(0, max(len(text), 1)),
                                       st.sampled_from(["del", "ins", "swap"]),
                                       st.text(string.printable + "é\x00", min_size=1,
                                               max_size=3)),
                             min_size=1, max_size=4))
    for pos, op, chunk in ops:
        pos = min(pos, len(text))
        if op == "del":
            text = text[:pos] + text[pos + len(chunk):]
        elif op == "ins":
            text = text[:pos] + chunk + text[pos:]
        else:
            text = text[:pos] + chunk + text[pos + len(chunk):]
    return text


def still_valid(parser, path):
    try:
        parser(path)
    except Exception:
        return False
    return True


@given(st.data())
def test_fuzz_mask_files(workdir, data):
    text = mutate(VALID_MASK, data)
    path = workdir / "fuzz.cmmask"
    path.write_text(text, encoding="utf-8", errors="surrogateescape")
    assume(not still_valid(parse_mask, path))
    code, out, _ = run(["check", "--mask", "fuzz.cmmask", "--M", "2", "--R", "0.125"], workdir)
    assert code == 2 and out == ""


@given(st.binary(max_size=300))
def test_fuzz_binary_masks(workdir, blob):
    path = workdir / "fuzzb.cmmask"
    path.write_bytes(blob)
    assume(not still_valid(parse_mask, path))
    code, _, _ = run(["dist", "--a", "fuzzb.cmmask", "--b", "disk.cmmask"], workdir)
    assert code == 2


@given(st.data())
def test_fuzz_field_files(workdir, data):
    text = mutate(VALID_FIELD, data)
    path = workdir / "fuzz.cmfield"
    path.write_text(text, encoding="utf-8", errors="surrogateescape")
    assume(not still_valid(parse_field, path))
    code, _, _ = run(["solve", "--mask", "disk.cmmask", "--f", "fuzz.cmfield", "--coeff",
                      "coeff.json", "--tol", "1e-8", "--out", "fz.cmfield"], workdir)
    assert code == 2


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10 ** 6, 10 ** 6) | st.floats(allow_nan=False)
    | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text(max_size=5), inner,
                                                                max_size=3),
    max_leaves=6)


@given(st.data())
def test_fuzz_configs(workdir, data):
    cfg = dict(VALID_CONFIG)
    cfg["budget"] = 0
    key = data.draw(st.sampled_from(sorted(cfg) + ["extra", "M", "R", "budget", "cooling"]))
    action = data.draw(st.sampled_from(["drop", "replace"]))
    if action == "drop" and key in cfg:
        del cfg[key]
        assume(key not in {"trace_out", "summary_out", "budget", "initial_temperature",
                           "rng_seed", "chains"})
    else:
        value = data.draw(json_values)
        assume(cfg.get(key) != value)
        cfg[key] = value
    (workdir / "fuzz.json").write_text(json.dumps(cfg))
    code, _, err = run(["optimize", "--config", "fuzz.json"], workdir)
    # some replacements are still well formed: a valid run, or an infeasible start
    if code == 1:
        assert json.loads(err)["error"] == "InfeasibleInit"
    assume(code == 2)


@given(st.lists(st.text(alphabet=string.ascii_letters + string.digits + "-./", max_size=12),
                max_size=6))
def test_fuzz_argv(workdir, argv):
    assume(not (argv and argv[0] in {"check", "dist", "converge", "solve", "optimize"}))
    code, _, _ = run(argv, workdir)
    assert code == 2
