"""Spatio-temporal trajectory chains and their ``mobility_info`` text rendering.

Rendered grammar, one line per slot, fields separated by `` | ``::

    slot <ii> <HH:MM>-<HH:MM> | weekday <d> | region <id> | POI <groups> | move <dist>

``<groups>`` is ``<Group>: <name>[ ×<k>], ...`` for each function group in
fixed order, joined by ``; ``. Repeated draws of one category collapse into a
single name with a ``×<k>`` multiplicity suffix, keeping first-draw order. A
group with no categories prints ``none``; a region with no POIs at all
prints ``POI unprofiled``. ``<dist>`` is ``start`` on slot 0 and otherwise the
centroid distance from the previous slot's region as ``<km with 2 decimals> km``.
"""

from __future__ import annotations

import datetime as dt
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError
from .geo import GROUP_ORDER, CategoryTaxonomy, RegionRegistry, region_distance
from .profile import GroupedWeights
from .sampling import RegionSample, SamplerConfig, sample_region
from .trajectory import SlottedTrajectory


@dataclass(frozen=True)
class ChainRecord:
    slot_index: int
    weekday: int
    region_id: int
    sample: RegionSample | None  # None marks an unprofiled region
    distance_from_prev_km: float | None

    @property
    def unprofiled(self) -> bool:
        return self.sample is None


@dataclass(frozen=True)
class TrajectoryChain:
    trajectory: SlottedTrajectory
    records: tuple[ChainRecord, ...]

    @property
    def user_pseudo_id(self) -> str:
        return self.trajectory.user_pseudo_id

    @property
    def date(self) -> dt.date:
        return self.trajectory.date

    @property
    def trajectory_id(self) -> str:
        return self.trajectory.trajectory_id

    def to_json(self) -> dict:
        samples = {}
        for r in self.records:
            if r.sample is not None:
                samples[str(r.region_id)] = r.sample.to_json()
        rec = self.trajectory.to_json()
        rec["trajectory_id"] = self.trajectory_id
        rec["samples"] = samples
        rec["records"] = [
            {
                "slot_index": r.slot_index,
                "weekday": r.weekday,
                "region_id": r.region_id,
                "distance_from_prev_km": r.distance_from_prev_km,
                "unprofiled": r.unprofiled,
            }
            for r in self.records
        ]
        return rec

    @classmethod
    def from_json(cls, rec: Mapping) -> "TrajectoryChain":
        traj = SlottedTrajectory.from_json(dict(rec))
        samples = {int(k): RegionSample.from_json(v) for k, v in rec["samples"].items()}
        records = tuple(
            ChainRecord(
                int(r["slot_index"]),
                int(r["weekday"]),
                int(r["region_id"]),
                None if r["unprofiled"] else samples[int(r["region_id"])],
                r["distance_from_prev_km"],
            )
            for r in rec["records"]
        )
        return cls(traj, records)


def build_chain(
    traj: SlottedTrajectory,
    profiles: Mapping[int, GroupedWeights],
    sampler: SamplerConfig,
    registry: RegionRegistry,
) -> TrajectoryChain:
    """One record per slot. Each distinct region is sampled once and reused."""
    samples: dict[int, RegionSample | None] = {}
    records = []
    prev = None
    for l, rid in enumerate(traj.regions):
        if rid not in samples:
            grouped = profiles.get(rid)
            samples[rid] = None if grouped is None else sample_region(grouped, sampler, traj.trajectory_id)
        dist = None if prev is None else region_distance(prev, rid, registry)
        records.append(ChainRecord(l, traj.weekday, rid, samples[rid], dist))
        prev = rid
    return TrajectoryChain(traj, tuple(records))


def _hhmm(minutes: float) -> str:
    m = int(round(minutes))
    return f"{m // 60:02d}:{m % 60:02d}"


def _render_group(ids: tuple[int, ...], taxonomy: CategoryTaxonomy) -> str:
    if not ids:
        return "none"
    counts = Counter(ids)
    parts = []
    for cid in dict.fromkeys(ids):
        name = taxonomy.entries[cid].name
        parts.append(name if counts[cid] == 1 else f"{name} ×{counts[cid]}")
    return ", ".join(parts)


def render_record(rec: ChainRecord, L: int, taxonomy: CategoryTaxonomy) -> str:
    width = 1440.0 / L
    start = rec.slot_index * width
    # Inclusive end label, e.g. 09:00-09:59 for hourly slots.
    span = f"{_hhmm(start)}-{_hhmm(start + width - 1)}" if width >= 2 else _hhmm(start)
    if rec.sample is None:
        pois = "POI unprofiled"
    else:
        pois = "POI " + "; ".join(
            f"{g.value}: {_render_group(rec.sample.per_group.get(g, ()), taxonomy)}"
            for g in GROUP_ORDER
        )
    move = "start" if rec.distance_from_prev_km is None else f"{rec.distance_from_prev_km:.2f} km"
    return (
        f"slot {rec.slot_index:02d} {span} | weekday {rec.weekday} | region {rec.region_id}"
        f" | {pois} | move {move}"
    )


def render_mobility_info(chain: TrajectoryChain, taxonomy: CategoryTaxonomy) -> str:
    L = len(chain.records)
    return "\n".join(render_record(r, L, taxonomy) for r in chain.records) + "\n"


def write_chains(chains: Iterable[TrajectoryChain], path: str | Path, extra: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in chains:
            rec = c.to_json()
            if extra:
                rec.update(extra)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_chains(path: str | Path) -> list[TrajectoryChain]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"chain file not found: {path}")
    chains = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                chains.append(TrajectoryChain.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad chain record: {exc}") from exc
    return chains
