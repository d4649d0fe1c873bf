# %% [markdown]
# # The command-line front end
#
# Masks and fields travel as small text files.  Every subcommand prints a
# JSON report; the exit status says whether the checked property held.

# %%
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from cmdomains import GridSpec, ScalarField
from cmdomains.io import emit_coefficients, emit_field, emit_mask
from cmdomains.shapes import box, disk, dumbbell, dumbbell_grid

work = Path(tempfile.mkdtemp())
grid = GridSpec((32, 32), 1 / 32)
emit_mask(disk(grid, (0.5, 0.5), 0.3), work / "disk.cmmask")
emit_mask(box(grid, (0.25, 0.25), (0.75, 0.75)), work / "square.cmmask")
emit_mask(dumbbell(dumbbell_grid()), work / "dumbbell.cmmask")
emit_field(ScalarField.constant(grid, 1.0), work / "ones.cmfield")
emit_coefficients([[1.0, 0.0], [0.0, 1.0]], work / "identity.json")
print((work / "square.cmmask").read_text().splitlines()[:4])


def cli(*args):
    proc = subprocess.run([sys.executable, "-m", "cmdomains", *args], cwd=work,
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


# %%
code, out, _ = cli("check", "--mask", "dumbbell.cmmask", "--M", "5", "--R", "0.1")
print("exit", code, json.loads(out)["report"]["failing_pair"])

# %%
code, out, _ = cli("dist", "--a", "disk.cmmask", "--b", "square.cmmask", "--complement")
print("exit", code, json.loads(out)["value"])

# %%
code, out, _ = cli("solve", "--mask", "disk.cmmask", "--f", "ones.cmfield", "--coeff",
                   "identity.json", "--tol", "1e-10", "--out", "u.cmfield")
print("exit", code, json.loads(out)["energy_check"])

# %%
(work / "run.json").write_text(json.dumps({
    "mask": "square.cmmask", "f": "ones.cmfield", "target_mask": "disk.cmmask",
    "M": 4, "R": 0.1, "budget": 200, "initial_temperature": 1e-10,
    "out_mask": "best.cmmask", "trace_out": "trace.jsonl"}))
code, out, _ = cli("optimize", "--config", "run.json")
summary = json.loads(out)["summary"]
print("exit", code, "J:", summary["initial_J"], "->", summary["best_J"])

# %% [markdown]
# Malformed input never crashes; it exits with status 2 and a JSON diagnostic
# on standard error.

# %%
(work / "broken.cmmask").write_text("CMMASK 2\n4 4 4\n1 0 0\n")
print(cli("check", "--mask", "broken.cmmask", "--M", "2", "--R", "0.1"))
