"""Ground-truth traffic traces and UE attach/detach schedules (CSV I/O and
synthetic generation)."""
from __future__ import annotations

import bisect
import csv
import io
import math
import random
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable

from .published import OAI_DL_IPERF, SRS_UL_IPERF

TRACE_COLUMNS = (
    "t_ms", "interval_ms", "ue_id", "dl_app_bytes", "ul_app_bytes",
    "dl_pkts", "ul_pkts", "prb_dl", "prb_ul", "rlc_delay_dl_ms",
)
EVENT_COLUMNS = ("t_ms", "ue_id", "kind")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRow:
    t_ms: int
    interval_ms: int
    ue_id: str
    dl_app_bytes: int = 0
    ul_app_bytes: int = 0
    dl_pkts: int = 0
    ul_pkts: int = 0
    prb_dl: int = 0
    prb_ul: int = 0
    rlc_delay_dl_ms: float = 0.0

    @property
    def end_ms(self) -> int:
        return self.t_ms + self.interval_ms


class TrafficTrace:
    """Rows of per-UE traffic.  A row is attributed to the bin holding its start."""

    def __init__(self, rows: Iterable[TraceRow] = ()):
        self.rows = sorted(rows, key=lambda r: (r.t_ms, r.ue_id))
        self._by_ue: dict[str, list[TraceRow]] = {}
        for r in self.rows:
            for name in ("t_ms", "dl_app_bytes", "ul_app_bytes", "dl_pkts", "ul_pkts",
                         "prb_dl", "prb_ul"):
                if getattr(r, name) < 0:
                    raise TraceError(f"negative {name} in {r}")
            if r.interval_ms <= 0:
                raise TraceError(f"non-positive interval in {r}")
            self._by_ue.setdefault(r.ue_id, []).append(r)
        for ue, rows in self._by_ue.items():
            for a, b in zip(rows, rows[1:]):
                if b.t_ms < a.end_ms:
                    raise TraceError(f"overlapping intervals for UE {ue} at t={b.t_ms}")
        self._starts = {ue: [r.t_ms for r in rows] for ue, rows in self._by_ue.items()}

    def __len__(self):
        return len(self.rows)

    @property
    def ue_ids(self) -> list[str]:
        return sorted(self._by_ue)

    @property
    def end_ms(self) -> int:
        return max((r.end_ms for r in self.rows), default=0)

    def rows_for(self, ue_id: str, start_ms: int, end_ms: int) -> list[TraceRow]:
        """Rows of ``ue_id`` whose start lies in ``[start_ms, end_ms)``."""
        starts = self._starts.get(ue_id)
        if not starts:
            return []
        lo = bisect.bisect_left(starts, start_ms)
        hi = bisect.bisect_left(starts, end_ms)
        return self._by_ue[ue_id][lo:hi]

    def totals(self, ue_id: str) -> TraceRow:
        rows = self._by_ue.get(ue_id, [])
        return TraceRow(
            0, max(self.end_ms, 1), ue_id,
            sum(r.dl_app_bytes for r in rows), sum(r.ul_app_bytes for r in rows),
            sum(r.dl_pkts for r in rows), sum(r.ul_pkts for r in rows),
            sum(r.prb_dl for r in rows), sum(r.prb_ul for r in rows),
        )

    # -- CSV ------------------------------------------------------------------

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow(astuple(r))
        return out.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "TrafficTrace":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise TraceError(f"trace header must be {','.join(TRACE_COLUMNS)}")
        types = [f.type for f in fields(TraceRow)]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(TRACE_COLUMNS):
                raise TraceError(f"line {lineno}: expected {len(TRACE_COLUMNS)} columns")
            try:
                vals = [float(v) if t == "float" else v if t == "str" else int(v)
                        for v, t in zip(rec, types)]
            except ValueError as exc:
                raise TraceError(f"line {lineno}: {exc}") from None
            rows.append(TraceRow(*vals))
        return cls(rows)

    @classmethod
    def read_csv(cls, path) -> "TrafficTrace":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class UeEvent:
    t_ms: int
    ue_id: str
    kind: str  # "attach" | "detach"


def read_ue_events(path) -> list[UeEvent]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != EVENT_COLUMNS:
            raise TraceError(f"UE events header must be {','.join(EVENT_COLUMNS)}")
        events = []
        for rec in reader:
            if not rec:
                continue
            t, ue, kind = rec
            if kind not in ("attach", "detach"):
                raise TraceError(f"unknown UE event kind {kind!r}")
            events.append(UeEvent(int(t), ue, kind))
    return events


def write_ue_events(path, events: Iterable[UeEvent]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for e in events:
            w.writerow((e.t_ms, e.ue_id, e.kind))


def attachment_intervals(events: Iterable[UeEvent], ue_ids: Iterable[str]):
    """Map UE id -> list of ``[start, end)`` attachment intervals.

    UEs are implicitly attached at t=0 unless their first event is an attach.
    """
    by_ue: dict[str, list[UeEvent]] = {ue: [] for ue in ue_ids}
    for e in sorted(events, key=lambda e: e.t_ms):
        by_ue.setdefault(e.ue_id, []).append(e)
    out = {}
    for ue, evs in by_ue.items():
        intervals = []
        start = 0 if not evs or evs[0].kind == "detach" else None
        for e in evs:
            if e.kind == "attach":
                if start is not None:
                    raise TraceError(f"UE {ue} attached twice (t={e.t_ms})")
                start = e.t_ms
            else:
                if start is None:
                    raise TraceError(f"UE {ue} detached while not attached (t={e.t_ms})")
                intervals.append((start, e.t_ms))
                start = None
        if start is not None:
            intervals.append((start, math.inf))
        out[ue] = intervals
    return out


# -- synthetic traces ----------------------------------------------------------

PROFILES = ("constant", "constant-ul", "fig5-dl", "fig6-ul")

# rough radio model for the PRB column
BYTES_PER_PRB = 128


def _rates(profile: str, seconds: int, rate_mbps: float) -> list[tuple[float, float]]:
    if profile == "constant":
        return [(rate_mbps, 0.0)] * seconds
    if profile == "constant-ul":
        return [(0.0, rate_mbps)] * seconds
    if profile == "fig5-dl":
        return [(OAI_DL_IPERF[i % len(OAI_DL_IPERF)], 0.0) for i in range(seconds)]
    if profile == "fig6-ul":
        return [(0.0, SRS_UL_IPERF[i % len(SRS_UL_IPERF)]) for i in range(seconds)]
    raise TraceError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")


def _bulk_bytes(mbps: float, bin_ms: int, payload: int) -> tuple[int, int]:
    """Bytes and packets for a bulk transfer of full-size segments."""
    pkts = round(mbps * 1e6 / 8 * bin_ms / 1000 / payload)
    nbytes = pkts * payload
    return nbytes, math.ceil(nbytes / payload)


def generate_trace(profile: str, duration_s: int, rate_mbps: float = 10.0,
                   payload_bytes: int = 1400, ues: int = 1, seed: int = 0,
                   bin_ms: int = 1000) -> TrafficTrace:
    """Synthesize an iPerf3-like trace, one row per UE per one-second bin."""
    if rate_mbps <= 0 and profile.startswith("constant"):
        raise TraceError("rate must be positive")
    if payload_bytes <= 0:
        raise TraceError("payload must be positive")
    if duration_s < 0:
        raise TraceError(f"duration must be >= 0, got {duration_s}")
    if ues < 1 or bin_ms < 1:
        raise TraceError(f"ues and bin_ms must be positive, got {ues} and {bin_ms}")
    rng = random.Random(seed)
    rows = []
    for i, (dl, ul) in enumerate(_rates(profile, int(duration_s), rate_mbps)):
        for u in range(ues):
            dl_bytes, dl_pkts = _bulk_bytes(dl, bin_ms, payload_bytes)
            ul_bytes, ul_pkts = _bulk_bytes(ul, bin_ms, payload_bytes)
            delay = round(rng.uniform(2.0, 8.0), 3) if dl_bytes else 0.0
            rows.append(TraceRow(
                i * bin_ms, bin_ms, f"ue{u + 1}", dl_bytes, ul_bytes, dl_pkts, ul_pkts,
                math.ceil(dl_bytes / BYTES_PER_PRB), math.ceil(ul_bytes / BYTES_PER_PRB),
                delay,
            ))
    return TrafficTrace(rows)
