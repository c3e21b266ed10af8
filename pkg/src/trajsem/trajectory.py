"""Stay records and their conversion into fixed-slot daily trajectories."""

from __future__ import annotations

import csv
import datetime as dt
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, EmptyDay

DAY = dt.timedelta(days=1)
STAY_COLUMNS = ("user_pseudo_id", "region_id", "start_iso8601", "end_iso8601")


@dataclass(frozen=True)
class StayRecord:
    user_pseudo_id: str
    region_id: int
    start: dt.datetime
    end: dt.datetime

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("stay timestamps must be timezone-aware")
        if not self.start < self.end:
            raise ValueError(f"stay start {self.start} is not before end {self.end}")


@dataclass(frozen=True)
class SlottedTrajectory:
    user_pseudo_id: str
    date: dt.date
    regions: tuple[int, ...]
    coverage: tuple[float, ...]  # observed minutes per slot

    @property
    def L(self) -> int:
        return len(self.regions)

    @property
    def weekday(self) -> int:
        return self.date.isoweekday()

    @property
    def slot_minutes(self) -> float:
        return 1440.0 / self.L

    @property
    def trajectory_id(self) -> str:
        return f"{self.user_pseudo_id}/{self.date.isoformat()}"

    def to_json(self) -> dict:
        return {
            "user_pseudo_id": self.user_pseudo_id,
            "date": self.date.isoformat(),
            "weekday": self.weekday,
            "regions": list(self.regions),
            "coverage": list(self.coverage),
        }

    @classmethod
    def from_json(cls, rec: dict) -> "SlottedTrajectory":
        return cls(
            rec["user_pseudo_id"],
            dt.date.fromisoformat(rec["date"]),
            tuple(int(r) for r in rec["regions"]),
            tuple(float(c) for c in rec["coverage"]),
        )


@dataclass(frozen=True)
class CoverageVerdict:
    accepted: bool
    fraction: float
    reason: str | None = None


def _parse_ts(value: str) -> dt.datetime:
    value = value.strip()
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    ts = dt.datetime.fromisoformat(value)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {value!r} has no UTC offset")
    return ts


def load_stays(path: str | Path, known_regions: Iterable[int] | None = None) -> list[StayRecord]:
    """Read stays from CSV, or JSON lines when the suffix is .jsonl/.json."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"stay file not found: {path}")
    known = set(known_regions) if known_regions is not None else None
    with path.open(newline="", encoding="utf-8") as fh:
        if path.suffix in (".jsonl", ".json"):
            rows = [json.loads(line) for line in fh if line.strip()]
        else:
            rows = list(csv.DictReader(fh))
    stays = []
    for rownum, row in enumerate(rows, start=1):
        try:
            stay = StayRecord(
                str(row["user_pseudo_id"]),
                int(row["region_id"]),
                _parse_ts(str(row["start_iso8601"])),
                _parse_ts(str(row["end_iso8601"])),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: row {rownum}: {exc}") from exc
        if known is not None and stay.region_id not in known:
            raise DataError(f"{path}: row {rownum}: unknown region_id {stay.region_id}")
        stays.append(stay)
    return stays


def group_user_days(
    stays: Iterable[StayRecord], date: dt.date | None = None
) -> dict[tuple[str, dt.date], list[StayRecord]]:
    """Bucket stays by (user, local calendar day); a stay crossing midnight lands in both days."""
    out: dict[tuple[str, dt.date], list[StayRecord]] = defaultdict(list)
    for s in stays:
        day = s.start.date()
        last = (s.end - dt.timedelta(microseconds=1)).astimezone(s.start.tzinfo).date()
        while day <= last:
            if date is None or day == date:
                out[(s.user_pseudo_id, day)].append(s)
            day += dt.timedelta(days=1)
    return dict(sorted(out.items()))


def _overlap(a0, a1, b0, b1) -> dt.timedelta:
    lo, hi = max(a0, b0), min(a1, b1)
    return hi - lo if hi > lo else dt.timedelta(0)


def _union_length(intervals: list[tuple[dt.datetime, dt.datetime]]) -> dt.timedelta:
    total = dt.timedelta(0)
    cur0 = cur1 = None
    for a, b in sorted(intervals):
        if cur1 is None or a > cur1:
            if cur1 is not None:
                total += cur1 - cur0
            cur0, cur1 = a, b
        else:
            cur1 = max(cur1, b)
    if cur1 is not None:
        total += cur1 - cur0
    return total


def slot_trajectory(stays: Sequence[StayRecord], date: dt.date, L: int = 24) -> SlottedTrajectory:
    """Label each of L equal slots of ``date`` with the region of maximal dwell.

    Dwell is exact interval overlap summed over all stays in a region. Ties go
    to the region with the earliest-starting stay touching the slot, then to
    the lower region id. Unobserved slots repeat the previous slot's region;
    unobserved leading slots take the first observed region. The day is
    midnight-to-midnight in the UTC offset of the earliest stay.
    """
    if L < 1 or 86_400_000_000 % L:
        raise ValueError(f"L={L} does not split a day into equal microsecond slots")
    if not stays:
        raise EmptyDay(f"no stays for {date}")
    users = {s.user_pseudo_id for s in stays}
    if len(users) != 1:
        raise ValueError(f"stays belong to several users: {sorted(users)}")
    ordered = sorted(stays, key=lambda s: (s.start, s.region_id, s.end))

    tz = ordered[0].start.tzinfo
    day0 = dt.datetime.combine(date, dt.time(0), tzinfo=tz)
    day1 = day0 + DAY
    ordered = [s for s in ordered if s.end > day0 and s.start < day1]
    if not ordered:
        raise EmptyDay(f"no stay of user {users.pop()} overlaps {date}")

    width = DAY / L
    picks: list[int | None] = []
    coverage = []
    for l in range(L):
        t0 = day0 + l * width
        t1 = t0 + width
        dwell: dict[int, dt.timedelta] = {}
        first_start: dict[int, dt.datetime] = {}
        clipped = []
        for s in ordered:
            ov = _overlap(s.start, s.end, t0, t1)
            if not ov:
                continue
            dwell[s.region_id] = dwell.get(s.region_id, dt.timedelta(0)) + ov
            first_start.setdefault(s.region_id, s.start)
            clipped.append((max(s.start, t0), min(s.end, t1)))
        coverage.append(_union_length(clipped).total_seconds() / 60.0)
        if dwell:
            best = min(dwell, key=lambda r: (-dwell[r], first_start[r], r))
            picks.append(best)
        else:
            picks.append(None)

    first = next(r for r in picks if r is not None)
    regions = []
    prev = first
    for r in picks:
        prev = r if r is not None else prev
        regions.append(prev)
    return SlottedTrajectory(ordered[0].user_pseudo_id, date, tuple(regions), tuple(coverage))


def validate_trajectory(traj: SlottedTrajectory, min_coverage_fraction: float = 0.5) -> CoverageVerdict:
    fraction = sum(traj.coverage) / 1440.0
    if fraction < min_coverage_fraction:
        return CoverageVerdict(False, fraction, f"coverage {fraction:.3f} < {min_coverage_fraction:g}")
    return CoverageVerdict(True, fraction)
