"""CSV formats for traces, detector events, handoff records and result tables.

Every write goes to a temporary file in the target directory first and is
renamed into place, so readers never see a half-written file.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from picocell60.detector import DetectorEvent
from picocell60.handoff import HandoffRecord
from picocell60.link_model import Q_MAX, Trace, throughput_series

TRACE_HEADER = ("t_ms", "q", "throughput_mbps")
EVENT_HEADER = ("at_ms", "kind", "x", "y", "ed1", "ed2", "ed3", "chosen", "verdict")
HANDOFF_HEADER = ("trigger", "from_ap", "to_ap", "t_start_ms", "t_complete_ms", "t_H_ms", "t_s_ms")


class TraceFormatError(ValueError):
    pass


def atomic_write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_table(path, header, rows) -> Path:
    return atomic_write_text(path, rows_to_csv(header, rows))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 6))
    return str(v)


# -- traces -----------------------------------------------------------------

def trace_to_csv(trace: Trace) -> str:
    tp = trace.throughput_mbps
    if tp is None:
        tp = throughput_series(trace.q)
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for t, q, r in zip(trace.t_ms.tolist(), trace.q.tolist(), tp.tolist()):
        buf.write(f"{t},{q},{r}\n")
    return buf.getvalue()


def write_trace(path, trace: Trace) -> Path:
    return atomic_write_text(path, trace_to_csv(trace))


def read_trace(path: str | Path) -> Trace:
    """Parse a trace file; raises TraceFormatError naming the offending line."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not text.strip():
        return Trace(0, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    header = [h.strip() for h in lines[0].split(",")]
    if tuple(header) != TRACE_HEADER:
        raise TraceFormatError(f"line 1: expected header {','.join(TRACE_HEADER)}, got {lines[0]!r}")
    ts, qs, tps = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise TraceFormatError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            t, q, tp = int(parts[0]), int(parts[1]), int(float(parts[2]))
        except ValueError:
            raise TraceFormatError(f"line {lineno}: non-numeric field in {line!r}") from None
        if not 0 <= q <= Q_MAX:
            raise TraceFormatError(f"line {lineno}: q={q} outside 0..10")
        if ts and t != ts[-1] + 1:
            raise TraceFormatError(f"line {lineno}: t_ms {t} does not follow {ts[-1]} by 1 ms")
        ts.append(t)
        qs.append(q)
        tps.append(tp)
    start = ts[0] if ts else 0
    return Trace(start, np.array(qs, dtype=np.int64), np.array(tps, dtype=np.int64))


# -- events and handoffs ----------------------------------------------------

def event_row(ev: DetectorEvent) -> list[str]:
    r = ev.result
    if r is None:
        return [str(ev.at_ms), ev.kind.value] + [""] * 7
    x, y = r.features if r.features is not None else ("", "")
    return [str(ev.at_ms), ev.kind.value, _fmt(x), _fmt(y), *(_fmt(d) for d in r.distances),
            str(r.chosen), r.verdict.value]


def events_to_csv(events: Iterable[DetectorEvent]) -> str:
    return rows_to_csv(EVENT_HEADER, (event_row(e) for e in events))


def write_events(path, events) -> Path:
    return atomic_write_text(path, events_to_csv(events))


def handoff_row(rec: HandoffRecord) -> list[str]:
    return [rec.trigger.value, _fmt(rec.from_ap), _fmt(rec.to_ap), str(rec.t_start_ms),
            str(rec.t_complete_ms), str(rec.t_H_ms), str(rec.t_s_ms)]


def write_handoffs(path, records) -> Path:
    return atomic_write_text(path, rows_to_csv(HANDOFF_HEADER, (handoff_row(r) for r in records)))
