"""Cross-implementation loss parity via the command-line reference.

The dataset toolkit ships a `synthcolon loss` command that evaluates the
same three-term loss. These helpers write a depth pair to the raw-float
interchange format, invoke the command in a subprocess, and compare its
breakdown against the torch implementation. Inputs are rounded to float32
first so both sides see byte-identical values.
"""

import json
import subprocess
import tempfile
from pathlib import Path

import numpy as np
import torch

from . import losses
from .raw import save_raw

DEFAULT_COMMAND = ("synthcolon",)


def loss_via_cli(pred, truth, weights=losses.DEFAULT_WEIGHTS,
                 command=DEFAULT_COMMAND) -> dict:
    """Evaluate the reference loss through the CLI on float32 raw files."""
    with tempfile.TemporaryDirectory() as tmp:
        pred_path = Path(tmp) / "pred.raw"
        truth_path = Path(tmp) / "truth.raw"
        save_raw(pred_path, np.asarray(pred, dtype=np.float32))
        save_raw(truth_path, np.asarray(truth, dtype=np.float32))
        argv = [*command, "loss", "--gt", str(truth_path),
                "--pred", str(pred_path),
                "--w", *(str(float(w)) for w in weights)]
        proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"reference loss command failed "
                           f"({proc.returncode}): {proc.stderr.strip()}")
    return json.loads(proc.stdout)


def torch_breakdown(pred, truth, weights=losses.DEFAULT_WEIGHTS) -> dict:
    """Torch loss breakdown on float32-rounded inputs, computed in float64."""
    p = torch.from_numpy(np.asarray(pred, dtype=np.float32)).double()
    t = torch.from_numpy(np.asarray(truth, dtype=np.float32)).double()
    lz, le, lc = losses.breakdown(p, t)
    total = (weights[0] * lz + weights[1] * le + weights[2] * lc)
    return {"loss_z": float(lz), "loss_e": float(le), "loss_c": float(lc),
            "total": float(total)}


def compare_with_reference(pred, truth, weights=losses.DEFAULT_WEIGHTS,
                           command=DEFAULT_COMMAND) -> dict:
    """Both breakdowns plus the worst relative deviation across terms."""
    ours = torch_breakdown(pred, truth, weights)
    reference = loss_via_cli(pred, truth, weights, command)
    worst = 0.0
    for key in ("loss_z", "loss_e", "loss_c", "total"):
        a, b = ours[key], float(reference[key])
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-30))
    return {"torch": ours, "reference": reference, "max_rel_diff": worst}
