"""File formats: dataset CSV, versioned model files, result tables.

All writers are atomic (temp file + rename) and print floats with 17
significant digits so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import csv
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from .core import (
    AUTONOMOUS, PERIODIC, PER_STEP, PdcError, ReducedModel, SlotIndexer,
    TimeSeries,
)

MODEL_FORMAT_VERSION = 1


class ParseError(PdcError, ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def atomic_write_text(path, text: str):
    """Write a whole file atomically (temp file in the same directory)."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- dataset CSV -----------------------------------------------------------


def write_dataset(path, series: TimeSeries, comment: str | None = None):
    """CSV with a ``time`` column, one column per channel, and optional
    ``s:``-prefixed exogenous tracks."""
    n, N = series.values.shape
    names = series.channel_names or tuple(f"c{i + 1}" for i in range(n))
    exo_names = list(series.exogenous)
    lines = []
    if comment:
        for c in comment.splitlines():
            lines.append(f"# {c}")
    lines.append(",".join(["time", *names, *(f"s:{e}" for e in exo_names)]))
    for j in range(N):
        row = [_fmt(series.times[j])]
        row += [_fmt(v) for v in series.values[:, j]]
        row += [_fmt(series.exogenous[e][j]) for e in exo_names]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def ingest_csv(path) -> TimeSeries:
    """Read a dataset CSV; parse errors carry the offending line number."""
    rows = []
    header = None
    with open(path, newline="") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = next(csv.reader([line]))
            cells = [c.strip() for c in cells]
            if header is None:
                header = (lineno, cells)
                continue
            rows.append((lineno, cells))
    if header is None:
        raise ParseError("file has no header row")
    hline, cols = header
    if not cols or cols[0] != "time":
        raise ParseError("first column must be named 'time'", hline)
    channel_names = [c for c in cols[1:] if not c.startswith("s:")]
    exo_names = [c[2:] for c in cols[1:] if c.startswith("s:")]
    for c in cols[1:]:
        if c.startswith("s:") and channel_names and cols[1:].index(c) < len(channel_names):
            raise ParseError("exogenous 's:' columns must come after the channels", hline)
    if not channel_names:
        raise ParseError("no channel columns", hline)
    if not rows:
        raise ParseError("no data rows", hline)
    width = len(cols)
    times, values, exo = [], [], []
    for lineno, cells in rows:
        if len(cells) != width:
            raise ParseError(
                f"expected {width} cells, found {len(cells)}", lineno)
        try:
            nums = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise ParseError(f"non-numeric cell {bad!r}", lineno)
        if times and nums[0] <= times[-1]:
            raise ParseError(
                f"time {nums[0]!r} does not increase past {times[-1]!r}", lineno)
        times.append(nums[0])
        values.append(nums[1:1 + len(channel_names)])
        exo.append(nums[1 + len(channel_names):])
    exo_arr = np.asarray(exo).T if exo_names else np.empty((0, len(rows)))
    try:
        return TimeSeries(
            np.asarray(values).T, times=np.asarray(times),
            exogenous={name: exo_arr[i] for i, name in enumerate(exo_names)},
            channel_names=tuple(channel_names))
    except PdcError as exc:
        raise ParseError(str(exc))


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


# -- model files -----------------------------------------------------------


def _matrix_lines(name: str, M: np.ndarray) -> list[str]:
    M = np.atleast_2d(M)
    out = [name]
    for row in M:
        out.append(" ".join(_fmt(v) for v in row))
    return out


def write_model(path, model: ReducedModel, seed: int | None = None,
                ledger: dict | None = None):
    """Versioned plain-text serialization at 17 significant digits."""
    lines = ["# pdc model file",
             f"version {MODEL_FORMAT_VERSION}",
             f"n {model.n}", f"m {model.m}", f"r {model.r}"]
    if model.slots.mode == PERIODIC:
        lines.append(f"slots periodic {model.slots.period}")
    else:
        lines.append(f"slots {model.slots.mode}")
    lines.append(f"n_slots {model.n_slots}")
    if seed is not None:
        lines.append(f"seed {seed}")
    lines.append(f"created {datetime.now(timezone.utc).isoformat()}")
    for s in range(model.n_slots):
        lines.append(f"slot {s}")
        lines += _matrix_lines("Qx", model.Qx(s))
        lines += _matrix_lines("Qy", model.Qy(s))
        for i in range(model.r):
            lines += _matrix_lines(f"A_{i + 1}", model.A[s, i])
        lines += _matrix_lines("b", model.b[s][None])
        lines += _matrix_lines("ybar", model.ybar[s][None])
    if ledger:
        lines.append(f"ledger {len(ledger)}")
        for (kind, k), entry in ledger.items():
            lines.append(f"entry {kind} {k}")
            for i in range(entry["A"].shape[0]):
                lines += _matrix_lines(f"A_{i + 1}", entry["A"][i])
            lines += _matrix_lines("b", entry["b"][None])
            lines += _matrix_lines("ybar", entry["ybar"][None])
    atomic_write_text(path, "\n".join(lines) + "\n")


class _Cursor:
    def __init__(self, path):
        with open(path) as f:
            self.items = [(i, ln.strip()) for i, ln in enumerate(f, start=1)]
        self.items = [(i, ln) for i, ln in self.items
                      if ln and not ln.startswith("#")]
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, None)

    def next_line(self, what: str):
        if self.pos >= len(self.items):
            raise ParseError(f"unexpected end of file, expected {what}")
        item = self.items[self.pos]
        self.pos += 1
        return item

    def expect(self, key: str) -> list[str]:
        lineno, line = self.next_line(key)
        parts = line.split()
        if parts[0] != key:
            raise ParseError(f"expected {key!r}, found {parts[0]!r}", lineno)
        return parts[1:]

    def matrix(self, key: str, shape) -> np.ndarray:
        self.expect(key)
        rows = []
        for _ in range(shape[0]):
            lineno, line = self.next_line(f"row of {key}")
            try:
                row = [float(v) for v in line.split()]
            except ValueError:
                raise ParseError(f"non-numeric entry in {key}", lineno)
            if len(row) != shape[1]:
                raise ParseError(
                    f"{key}: expected {shape[1]} entries, found {len(row)}", lineno)
            rows.append(row)
        return np.asarray(rows)


def read_model(path) -> ReducedModel:
    """Parse a model file; orthogonality is re-validated on construction."""
    cur = _Cursor(path)
    lineno, line = cur.next_line("version")
    if line.split() != ["version", str(MODEL_FORMAT_VERSION)]:
        raise ParseError(f"unsupported model file header {line!r}", lineno)
    n = int(cur.expect("n")[0])
    m = int(cur.expect("m")[0])
    r = int(cur.expect("r")[0])
    slot_parts = cur.expect("slots")
    if slot_parts[0] == PERIODIC:
        slots = SlotIndexer(PERIODIC, int(slot_parts[1]))
    elif slot_parts[0] in (AUTONOMOUS, PER_STEP):
        slots = SlotIndexer(slot_parts[0])
    else:
        raise ParseError(f"unknown slot mode {slot_parts[0]!r}")
    n_slots = int(cur.expect("n_slots")[0])
    # optional metadata lines
    while True:
        lineno, line = cur.peek()
        if line is None:
            raise ParseError("model file has no slot sections")
        key = line.split()[0]
        if key in ("seed", "created"):
            cur.next_line(key)
            continue
        break
    Q = np.empty((n_slots, n, n))
    A = np.empty((n_slots, r, m, m))
    b = np.empty((n_slots, m))
    ybar = np.empty((n_slots, n - m))
    for s in range(n_slots):
        idx = int(cur.expect("slot")[0])
        if idx != s:
            raise ParseError(f"slot sections out of order (found {idx}, expected {s})")
        Q[s, :, :m] = cur.matrix("Qx", (n, m))
        Q[s, :, m:] = cur.matrix("Qy", (n, n - m))
        for i in range(r):
            A[s, i] = cur.matrix(f"A_{i + 1}", (m, m))
        b[s] = cur.matrix("b", (1, m))[0]
        ybar[s] = cur.matrix("ybar", (1, n - m))[0]
    return ReducedModel(n=n, m=m, r=r, slots=slots, Q=Q, A=A, b=b, ybar=ybar)


# -- result tables ---------------------------------------------------------


def write_table(path, header: list[str], rows, comment: str | None = None):
    """Plain CSV with 17-digit floats; non-floats are written as-is."""
    lines = []
    if comment:
        for c in comment.splitlines():
            lines.append(f"# {c}")
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("1" if v else "0")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(_fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_config(path) -> dict[str, str]:
    """key=value option file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, found {line!r}", lineno)
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
