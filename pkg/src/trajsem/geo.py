"""POI and region ingestion, POI-to-region assignment, and centroid distances."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from shapely.geometry import Point, shape
from shapely.geometry.base import BaseGeometry
from shapely.prepared import prep

from .errors import DataError

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0

POI_COLUMNS = ("poi_id", "category_name", "lat", "lon")


class FunctionGroup(str, Enum):
    HOME = "Home"
    WORK = "Work"
    SCHOOL = "School"
    LEISURE = "Leisure"
    OTHER = "Other"

    @classmethod
    def parse(cls, value: str) -> "FunctionGroup":
        for g in cls:
            if g.value.lower() == str(value).strip().lower():
                return g
        raise ValueError(f"unknown function group {value!r}")


# Concatenation order for sampled categories.
GROUP_ORDER: tuple[FunctionGroup, ...] = tuple(FunctionGroup)


@dataclass(frozen=True)
class Category:
    category_id: int
    name: str
    group: FunctionGroup


@dataclass(frozen=True)
class CategoryTaxonomy:
    entries: tuple[Category, ...]

    def __post_init__(self):
        ids = [c.category_id for c in self.entries]
        if ids != list(range(len(ids))):
            raise DataError("taxonomy category ids must be dense 0..M-1 in order")
        names = [c.name for c in self.entries]
        if len(set(names)) != len(names):
            raise DataError("taxonomy category names must be unique")

    @property
    def M(self) -> int:
        return len(self.entries)

    def by_name(self, name: str) -> Category:
        for c in self.entries:
            if c.name == name:
                return c
        raise KeyError(name)

    def name_index(self) -> dict[str, int]:
        return {c.name: c.category_id for c in self.entries}

    def group_members(self, group: FunctionGroup) -> list[int]:
        return [c.category_id for c in self.entries if c.group is group]

    def to_json(self) -> dict:
        return {
            "categories": [
                {"id": c.category_id, "name": c.name, "group": c.group.value}
                for c in self.entries
            ]
        }


def load_taxonomy(path: str | Path) -> CategoryTaxonomy:
    """Read ``{"categories": [{"id", "name", "group"}, ...]}``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"taxonomy file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        items = sorted(raw["categories"], key=lambda c: int(c["id"]))
        entries = tuple(
            Category(int(c["id"]), str(c["name"]), FunctionGroup.parse(c["group"]))
            for c in items
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed taxonomy file {path}: {exc}") from exc
    return CategoryTaxonomy(entries)


@dataclass(frozen=True)
class PoiRecord:
    poi_id: str
    category_id: int
    lat: float
    lon: float


@dataclass
class PoiLoadSummary:
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def _check_latlon(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0):
        raise ValueError(f"lat {lat} out of range")
    if not (-180.0 <= lon <= 180.0):
        raise ValueError(f"lon {lon} out of range")


def load_pois(
    path: str | Path, taxonomy: CategoryTaxonomy
) -> tuple[list[PoiRecord], PoiLoadSummary]:
    """Load a POI CSV with columns ``poi_id, category_name, lat, lon``.

    Rows that fail validation (bad coordinates, unknown category, unparseable
    numbers) are skipped and listed in the summary with their 1-based data row
    number. A missing file or missing header columns raises ``DataError``.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"POI file not found: {path}")
    names = taxonomy.name_index()
    records: list[PoiRecord] = []
    summary = PoiLoadSummary()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in POI_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for rownum, row in enumerate(reader, start=1):
            try:
                name = row["category_name"]
                if name not in names:
                    raise ValueError(f"unknown category {name!r}")
                lat, lon = float(row["lat"]), float(row["lon"])
                _check_latlon(lat, lon)
                poi_id = row["poi_id"]
                if not poi_id:
                    raise ValueError("empty poi_id")
            except (ValueError, TypeError) as exc:
                summary.rejected.append((rownum, str(exc)))
                continue
            records.append(PoiRecord(poi_id, names[name], lat, lon))
    summary.accepted = len(records)
    if summary.rejected:
        log.warning("%s: rejected %d POI rows", path, summary.n_rejected)
    return records, summary


@dataclass(frozen=True)
class Region:
    region_id: int
    name: str
    centroid: tuple[float, float]  # (lat, lon)
    boundary: BaseGeometry | None = None


class RegionRegistry:
    """Immutable set of regions keyed by integer id."""

    def __init__(self, regions: Iterable[Region]):
        self._regions: dict[int, Region] = {}
        for r in regions:
            if r.region_id in self._regions:
                raise DataError(f"duplicate region_id {r.region_id}")
            self._regions[r.region_id] = r
        if not self._regions:
            raise DataError("region registry is empty")
        self._prepared = {
            rid: prep(r.boundary) for rid, r in self._regions.items() if r.boundary is not None
        }

    @property
    def R(self) -> int:
        return len(self._regions)

    def __contains__(self, region_id: object) -> bool:
        return region_id in self._regions

    def __getitem__(self, region_id: int) -> Region:
        try:
            return self._regions[region_id]
        except KeyError:
            raise KeyError(f"unknown region_id {region_id}") from None

    def __iter__(self):
        return iter(self._regions.values())

    def ids(self) -> list[int]:
        return sorted(self._regions)

    def containing(self, lat: float, lon: float) -> list[int]:
        """Ids of regions whose boundary covers the point (boundary counts as inside)."""
        pt = Point(lon, lat)
        return sorted(rid for rid, g in self._prepared.items() if g.covers(pt))

    def nearest(self, lat: float, lon: float) -> int:
        return min(
            self.ids(),
            key=lambda rid: (haversine_km(lat, lon, *self._regions[rid].centroid), rid),
        )


def _ring_mean(geom: BaseGeometry) -> tuple[float, float]:
    polys = list(getattr(geom, "geoms", [geom]))
    pts = []
    for p in polys:
        coords = list(p.exterior.coords)
        if len(coords) > 1 and coords[0] == coords[-1]:
            coords = coords[:-1]
        pts.extend(coords)
    lon = sum(c[0] for c in pts) / len(pts)
    lat = sum(c[1] for c in pts) / len(pts)
    return lat, lon


def load_regions(path: str | Path) -> RegionRegistry:
    """Read a GeoJSON FeatureCollection of regions.

    Each feature needs an integer ``region_id`` property. ``name`` and
    ``centroid_lat``/``centroid_lon`` are optional; a feature may have a null
    geometry if it supplies its centroid.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"region file not found: {path}")
    try:
        fc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if fc.get("type") != "FeatureCollection":
        raise DataError(f"{path}: expected a GeoJSON FeatureCollection")

    regions = []
    for i, feat in enumerate(fc.get("features", [])):
        props = feat.get("properties") or {}
        try:
            rid = props["region_id"]
            if isinstance(rid, bool) or int(rid) != rid:
                raise ValueError(f"region_id must be an integer, got {rid!r}")
            rid = int(rid)
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: feature {i}: {exc}") from exc
        geom = shape(feat["geometry"]) if feat.get("geometry") else None
        if geom is not None and geom.geom_type not in ("Polygon", "MultiPolygon"):
            raise DataError(f"{path}: region {rid}: unsupported geometry {geom.geom_type}")

        if "centroid_lat" in props and "centroid_lon" in props:
            centroid = (float(props["centroid_lat"]), float(props["centroid_lon"]))
            if geom is not None and not geom.covers(Point(centroid[1], centroid[0])):
                raise DataError(f"{path}: region {rid}: supplied centroid lies outside boundary")
        elif geom is not None:
            centroid = _ring_mean(geom)
            if not geom.covers(Point(centroid[1], centroid[0])):
                rp = geom.representative_point()
                log.warning("region %s: vertex mean outside boundary, using interior point", rid)
                centroid = (rp.y, rp.x)
        else:
            raise DataError(f"{path}: region {rid}: needs a geometry or a centroid")
        try:
            _check_latlon(*centroid)
        except ValueError as exc:
            raise DataError(f"{path}: region {rid}: {exc}") from exc
        regions.append(Region(rid, str(props.get("name", rid)), centroid, geom))
    return RegionRegistry(regions)


@dataclass(frozen=True)
class PoiHistogram:
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    @classmethod
    def empty(cls, M: int) -> "PoiHistogram":
        return cls((0,) * M)


def assign_pois_to_regions(
    pois: Sequence[PoiRecord], registry: RegionRegistry, M: int
) -> dict[int, PoiHistogram]:
    """Count POIs per category per region.

    A POI covered by several polygons goes to the lowest region id; a POI
    covered by none goes to the nearest centroid. Every region in the
    registry gets a histogram, empty or not.
    """
    counts = {rid: [0] * M for rid in registry.ids()}
    for p in pois:
        hits = registry.containing(p.lat, p.lon)
        rid = hits[0] if hits else registry.nearest(p.lat, p.lon)
        counts[rid][p.category_id] += 1
    return {rid: PoiHistogram(tuple(c)) for rid, c in counts.items()}


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def region_distance(a: int, b: int, registry: RegionRegistry) -> float:
    """Great-circle distance in km between the centroids of two regions."""
    ra, rb = registry[a], registry[b]
    if a == b:
        return 0.0
    return haversine_km(*ra.centroid, *rb.centroid)


def histograms_to_json(hists: Mapping[int, PoiHistogram]) -> dict:
    return {str(rid): list(h.counts) for rid, h in sorted(hists.items())}
