"""Trace CSV and summary JSON files.

Trace files start with ``#``-prefixed ``key = value`` lines (config hash,
seed, budget, algorithm), then the fixed header and one row per round.
Floats use 17 significant digits so a round trip is exact.  Every write goes
to a temporary file in the target directory followed by a rename.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from roibandit.engine import TRACE_COLUMNS, Trace


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return "%.17g" % x


def trace_text(trace: Trace, config_hash: str, seed: int) -> str:
    lines = [
        f"# config_hash = {config_hash}",
        f"# seed = {int(seed)}",
        f"# B = {_fmt(trace.B)}",
        f"# algorithm = {trace.meta.get('algorithm', '')}",
        ",".join(TRACE_COLUMNS),
    ]
    cols = (trace.v, trace.beta, trace.x, trace.f, trace.c, trace.g, trace.h, trace.lam, trace.mu,
            trace.budget_remaining)
    for i in range(trace.T):
        row = [str(int(trace.t[i]))] + [_fmt(float(c[i])) for c in cols] + [str(int(trace.depleted[i]))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_trace(path, trace: Trace, config_hash: str, seed: int) -> None:
    atomic_write(path, trace_text(trace, config_hash, seed))


def read_trace(path) -> tuple[Trace, dict]:
    """Parse a trace file; returns the trace and its ``#`` header fields."""
    header: dict[str, str] = {}
    body = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = val.strip()
            else:
                body.append(line)
    if not body or body[0].strip() != ",".join(TRACE_COLUMNS):
        raise ValueError(f"{path}: trace header must be {','.join(TRACE_COLUMNS)}")
    for key in ("config_hash", "seed", "B"):
        if key not in header:
            raise ValueError(f"{path}: missing '# {key} = ...' line")
    rows = np.loadtxt(body[1:], delimiter=",", ndmin=2) if len(body) > 1 else np.zeros((0, len(TRACE_COLUMNS)))
    if rows.shape[1] != len(TRACE_COLUMNS):
        raise ValueError(f"{path}: expected {len(TRACE_COLUMNS)} columns")
    T = len(rows)
    if not np.array_equal(rows[:, 0], np.arange(1, T + 1)):
        raise ValueError(f"{path}: rounds must run 1..T in order")
    depleted = rows[:, 11].astype(bool)
    tau = int(np.argmax(depleted)) + 1 if depleted.any() else T + 1
    c = {name: rows[:, j] for j, name in enumerate(TRACE_COLUMNS)}
    trace = Trace(
        t=rows[:, 0].astype(np.int64), v=c["v"], beta=c["beta"], x=c["x"], f=c["f"], c=c["c"], g=c["g"],
        h=c["h"], lam=c["lambda"], mu=c["mu"], budget_remaining=c["budget_remaining"], depleted=depleted,
        B=float(header["B"]), tau=tau, meta={"algorithm": header.get("algorithm", ""), "seed": int(header["seed"])},
    )
    return trace, header


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(record) -> str:
    return json.dumps(_jsonable(record), sort_keys=True, indent=2) + "\n"


def write_json(path, record) -> None:
    atomic_write(path, dumps(record))


def write_jsonl(path, records) -> None:
    atomic_write(path, "".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in records))
