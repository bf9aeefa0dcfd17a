"""Serialization of run outputs: deterministic JSON summaries and CSV tables."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


def _clean(obj):
    """Recursively convert numpy types and round floats to ``SIG_DIGITS`` significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
        if x == 0.0:
            return 0.0
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.{SIG_DIGITS}g}" if isinstance(v, float) else v for v in row])
    return path


def decomposition_dict(dec) -> dict:
    """Summary of a :class:`~pinblock.sbdcore.BlockDecomposition`."""
    return {
        "sizes": dec.sizes,
        "size_multiset": list(dec.size_multiset()),
        "blocks": [{"size": b.size, "kind": b.kind, "class": b.cls, "spectrum": b.spectrum}
                   for b in dec.blocks],
        "driven_size": dec.driven_size,
        "residual_L": dec.residual_L,
        "residual_R": dec.residual_R,
        "commutator": dec.commutator,
        "flags": list(dec.flags),
    }


def msf_rows(curve):
    return list(curve.rows())


def sim_rows(outcome):
    for k, t in enumerate(outcome.t):
        for i in range(outcome.errors.shape[1]):
            yield float(t), i + 1, float(outcome.errors[k, i])
