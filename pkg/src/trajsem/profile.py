"""TF-IDF POI profiles per region, split into function-group weight vectors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError, EmptyRegion
from .geo import GROUP_ORDER, CategoryTaxonomy, FunctionGroup, PoiHistogram

__all__ = [
    "PoiHistogram",
    "RegionProfile",
    "GroupedWeights",
    "compute_document_frequency",
    "compute_tfidf",
    "group_weights",
    "profile_regions",
    "write_profiles",
    "read_profiles",
]


@dataclass(frozen=True)
class RegionProfile:
    region_id: int
    weights: tuple[float, ...]


@dataclass(frozen=True)
class GroupedWeights:
    region_id: int
    # group -> ((category_id, weight), ...) in taxonomy order
    per_group: Mapping[FunctionGroup, tuple[tuple[int, float], ...]]


def compute_document_frequency(histograms: Mapping[int, PoiHistogram], R: int) -> list[int]:
    """Number of regions in which each category has at least one POI."""
    if R < 1 or R != len(histograms):
        raise ValueError(f"R={R} does not match {len(histograms)} histograms")
    M = len(next(iter(histograms.values())).counts)
    q = [0] * M
    for h in histograms.values():
        for i, n in enumerate(h.counts):
            if n > 0:
                q[i] += 1
    return q


def compute_tfidf(
    histogram: PoiHistogram, q: list[int], R: int, region_id: int | None = None
) -> RegionProfile:
    """w_i = (n_i / N_r) * ln(R / q_i), with w_i = 0 wherever n_i = 0."""
    N_r = histogram.total
    if N_r == 0:
        raise EmptyRegion(region_id)
    weights = []
    for n_i, q_i in zip(histogram.counts, q):
        if n_i == 0:
            weights.append(0.0)
            continue
        if q_i <= 0:
            raise ValueError("category present in region but q_i == 0; q is inconsistent")
        weights.append((n_i / N_r) * math.log(R / q_i))
    return RegionProfile(region_id, tuple(weights))


def group_weights(
    profile: RegionProfile, taxonomy: CategoryTaxonomy, q: list[int] | None = None
) -> GroupedWeights:
    """Split a profile by function group.

    With ``q`` given, categories that have no POI in any region are left out,
    so a group whose categories are all absent city-wide comes out empty.
    """
    per_group = {
        g: tuple(
            (cid, profile.weights[cid])
            for cid in taxonomy.group_members(g)
            if q is None or q[cid] > 0
        )
        for g in GROUP_ORDER
    }
    return GroupedWeights(profile.region_id, per_group)


def profile_regions(
    histograms: Mapping[int, PoiHistogram],
) -> tuple[dict[int, RegionProfile], list[int]]:
    """Profile every region; returns (profiles, ids of empty regions)."""
    R = len(histograms)
    q = compute_document_frequency(histograms, R)
    profiles, empty = {}, []
    for rid in sorted(histograms):
        try:
            profiles[rid] = compute_tfidf(histograms[rid], q, R, rid)
        except EmptyRegion:
            empty.append(rid)
    return profiles, empty


def profile_to_json(profile: RegionProfile) -> dict:
    return {
        "region_id": profile.region_id,
        "weights": [
            {"category_id": i, "w": w} for i, w in enumerate(profile.weights) if w != 0.0
        ],
    }


def write_profiles(
    profiles: Iterable[RegionProfile], path: str | Path, extra: Mapping | None = None
) -> None:
    """One JSON object per line; zero weights are omitted."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in sorted(profiles, key=lambda p: p.region_id):
            rec = profile_to_json(p)
            if extra:
                rec.update(extra)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_profiles(path: str | Path, M: int) -> dict[int, RegionProfile]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"profiles file not found: {path}")
    out = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                w = [0.0] * M
                for item in rec["weights"]:
                    w[int(item["category_id"])] = float(item["w"])
                rid = int(rec["region_id"])
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad profile record: {exc}") from exc
            out[rid] = RegionProfile(rid, tuple(w))
    return out
