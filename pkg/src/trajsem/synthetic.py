"""Synthetic city, POI, stay and LLM-answer generator for demos and tests.

    python -m trajsem.synthetic OUT_DIR [--regions 50] [--pois 5000] [--users 100]

writes taxonomy.json, regions.geojson, pois.csv, stays.csv and a config.json
that runs the pipeline against a replay fixture directory. Pass
``--fixtures`` to also write canned answers for every trajectory.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import math
import random
from pathlib import Path
from typing import Sequence

from .chain import read_chains, render_mobility_info
from .gateway import LlmRequest, write_fixture
from .geo import GROUP_ORDER, FunctionGroup, load_taxonomy
from .pipeline import PipelineConfig, cmd_format, cmd_profile
from .prompt import PromptConfig, load_template, render_prompt
from .results import InferenceScenario, render_result
from .trajectory import SlottedTrajectory

CATEGORIES: dict[FunctionGroup, tuple[str, ...]] = {
    FunctionGroup.HOME: ("Residential community", "Apartment", "Dormitory", "Villa"),
    FunctionGroup.WORK: ("Office building", "Industrial park", "Business center", "Government office"),
    FunctionGroup.SCHOOL: ("Primary school", "Middle school", "University", "Training center"),
    FunctionGroup.LEISURE: ("Restaurant", "Shopping mall", "Park", "Cinema", "Gym"),
    FunctionGroup.OTHER: ("Bank", "Hospital", "Bus station", "Gas station"),
}
TZ = dt.timezone(dt.timedelta(hours=8))
ORIGIN = (22.50, 113.90)  # (lat, lon) south-west corner of the grid
CELL = 0.02  # degrees

# Region ids and stays for the worked example day; each stay gives its region
# the majority of the slots it covers.
EXAMPLE_SEQUENCE = (161,) * 9 + (365, 365, 359, 359, 365, 365, 361, 365, 361, 361, 359, 359, 365, 365, 161)
EXAMPLE_STAYS = (
    (161, "00:00", "09:05"),
    (365, "09:05", "11:10"),
    (359, "11:10", "13:20"),
    (365, "13:20", "15:15"),
    (361, "15:15", "16:05"),
    (365, "16:05", "16:50"),
    (361, "16:50", "19:10"),
    (359, "19:10", "21:00"),
    (365, "21:00", "22:55"),
    (161, "22:55", "23:59"),
)


def taxonomy_json() -> dict:
    entries, cid = [], 0
    for g in GROUP_ORDER:
        for name in CATEGORIES[g]:
            entries.append({"id": cid, "name": name, "group": g.value})
            cid += 1
    return {"categories": entries}


def square(lat0: float, lon0: float, size: float) -> list[list[float]]:
    return [[lon0, lat0], [lon0 + size, lat0], [lon0 + size, lat0 + size], [lon0, lat0 + size], [lon0, lat0]]


def region_feature(rid: int, lat0: float, lon0: float, size: float = CELL) -> dict:
    return {
        "type": "Feature",
        "properties": {"region_id": rid, "name": f"Shequ {rid}"},
        "geometry": {"type": "Polygon", "coordinates": [square(lat0, lon0, size)]},
    }


def grid_regions(n: int, first_id: int = 100) -> list[dict]:
    cols = max(1, math.ceil(math.sqrt(n)))
    return [
        region_feature(first_id + i, ORIGIN[0] + (i // cols) * CELL, ORIGIN[1] + (i % cols) * CELL)
        for i in range(n)
    ]


def random_pois(features: Sequence[dict], n: int, rng: random.Random) -> list[dict]:
    tax = taxonomy_json()["categories"]
    by_group = {g: [c for c in tax if c["group"] == g.value] for g in GROUP_ORDER}
    flavor = {f["properties"]["region_id"]: rng.choice(GROUP_ORDER) for f in features}
    rows = []
    for i in range(n):
        f = rng.choice(features)
        rid = f["properties"]["region_id"]
        ring = f["geometry"]["coordinates"][0]
        lon0, lat0 = ring[0]
        size = ring[1][0] - lon0
        group = flavor[rid] if rng.random() < 0.6 else rng.choice(GROUP_ORDER)
        cats = by_group[group]
        # skewed within the group so TF-IDF weights differ
        cat = cats[min(int(rng.expovariate(1.2)), len(cats) - 1)]
        rows.append(
            {
                "poi_id": f"p{i:06d}",
                "category_name": cat["name"],
                "lat": f"{lat0 + rng.random() * size:.6f}",
                "lon": f"{lon0 + rng.random() * size:.6f}",
            }
        )
    return rows


def _ts(date: dt.date, hhmm: str) -> str:
    h, m = map(int, hhmm.split(":"))
    t = dt.datetime.combine(date, dt.time(0), tzinfo=TZ) + dt.timedelta(hours=h, minutes=m)
    return t.isoformat()


def random_stays(region_ids: Sequence[int], n_users: int, date: dt.date, rng: random.Random) -> list[dict]:
    rows = []
    for u in range(n_users):
        home, work, lunch, evening = (rng.choice(region_ids) for _ in range(4))
        leave = 7 * 60 + rng.randrange(0, 150)
        arrive = leave + rng.randrange(20, 60)
        noon = 12 * 60 + rng.randrange(-20, 20)
        back = noon + rng.randrange(45, 80)
        off = 17 * 60 + rng.randrange(0, 120)
        out = off + rng.randrange(15, 45)
        home_again = out + rng.randrange(60, 180)
        plan = [
            (home, 0, leave),
            (work, arrive, noon),
            (lunch, noon, back),
            (work, back, off),
            (evening, out, home_again),
            (home, home_again, 1439),
        ]
        for rid, a, b in plan:
            if b <= a:
                continue
            rows.append(
                {
                    "user_pseudo_id": f"u{u:04d}",
                    "region_id": rid,
                    "start_iso8601": _ts(date, f"{a // 60:02d}:{a % 60:02d}"),
                    "end_iso8601": _ts(date, f"{b // 60:02d}:{b % 60:02d}"),
                }
            )
    return rows


def _write_csv(path: Path, rows: list[dict], columns: Sequence[str]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _write_inputs(out: Path, features, pois, stays) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "taxonomy.json").write_text(json.dumps(taxonomy_json(), indent=1) + "\n", encoding="utf-8")
    (out / "regions.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": features}) + "\n", encoding="utf-8"
    )
    _write_csv(out / "pois.csv", pois, ("poi_id", "category_name", "lat", "lon"))
    _write_csv(out / "stays.csv", stays, ("user_pseudo_id", "region_id", "start_iso8601", "end_iso8601"))
    config = {
        "paths": {
            "pois": "pois.csv",
            "regions": "regions.geojson",
            "taxonomy": "taxonomy.json",
            "stays": "stays.csv",
            "out_dir": "out",
        },
        "seed": 7,
        "backend": {"kind": "replay", "fixture_dir": "fixtures"},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")


def write_city(
    out: str | Path,
    n_regions: int = 50,
    n_pois: int = 5000,
    n_users: int = 100,
    seed: int = 0,
    date: dt.date = dt.date(2021, 11, 1),
) -> Path:
    out = Path(out)
    rng = random.Random(seed)
    features = grid_regions(n_regions)
    pois = random_pois(features, n_pois, rng)
    stays = random_stays([f["properties"]["region_id"] for f in features], n_users, date, rng)
    _write_inputs(out, features, pois, stays)
    return out


def write_worked_example(out: str | Path, seed: int = 0, date: dt.date = dt.date(2021, 11, 1)) -> Path:
    """Four regions and one user whose day slots into ``EXAMPLE_SEQUENCE``, plus filler regions."""
    out = Path(out)
    rng = random.Random(seed)
    layout = {161: (0, 0), 359: (1, 2), 361: (3, 1), 365: (2, 3), 400: (0, 3), 401: (3, 3)}
    features = [region_feature(rid, ORIGIN[0] + r * CELL, ORIGIN[1] + c * CELL) for rid, (r, c) in layout.items()]
    pois = random_pois(features, 600, rng)
    stays = [
        {"user_pseudo_id": "commuter", "region_id": rid, "start_iso8601": _ts(date, a), "end_iso8601": _ts(date, b)}
        for rid, a, b in EXAMPLE_STAYS
    ]
    _write_inputs(out, features, pois, stays)
    return out


def synthesize_answer(traj: SlottedTrajectory, config: PromptConfig | None = None) -> str:
    """A grammar-conformant answer with rule-of-thumb activity labels."""
    config = config or PromptConfig()
    night = [r for l, r in enumerate(traj.regions) if l * traj.slot_minutes < 360]
    home = max(set(night or traj.regions), key=lambda r: (night.count(r), -r))
    day = [r for l, r in enumerate(traj.regions) if 540 <= l * traj.slot_minutes < 1020 and r != home]
    work = max(set(day), key=lambda r: (day.count(r), -r)) if day else None
    cats = config.occupational_categories
    picks = [cats[0], cats[1 % len(cats)], cats[-1]]
    scenarios = []
    for i, label in enumerate(config.scenario_labels):
        busy = "School" if picks[i % 3] == "Student" else "Work"
        seq = []
        for r in traj.regions:
            if r == home:
                seq.append("Home")
            elif r == work:
                seq.append(busy)
            else:
                seq.append("Leisure" if i % 2 == 0 else "Other")
        desc = (
            f"As a {picks[i % 3].lower()}, the person stays in region {home} overnight"
            + (f" and spends most of the daytime in region {work}." if work else ".")
        )
        scenarios.append(InferenceScenario(label, picks[i % 3], tuple(seq), desc))
    return render_result(scenarios)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="python -m trajsem.synthetic", description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--regions", type=int, default=50)
    ap.add_argument("--pois", type=int, default=5000)
    ap.add_argument("--users", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--worked-example", action="store_true", help="write the worked-example day instead")
    ap.add_argument("--fixtures", action="store_true", help="also write replay answers (runs profile+format)")
    args = ap.parse_args(argv)
    if args.worked_example:
        out = write_worked_example(args.out, args.seed)
    else:
        out = write_city(args.out, args.regions, args.pois, args.users, args.seed)
    if args.fixtures:
        write_replay_fixtures(out / "config.json")
    print(f"wrote synthetic inputs to {out}")
    return 0


def write_replay_fixtures(config_path: str | Path) -> int:
    """Run profile+format for a config and store a synthesized answer for every prompt."""
    cfg = PipelineConfig.load(config_path)
    cmd_profile(cfg)
    cmd_format(cfg)
    taxonomy = load_taxonomy(cfg.taxonomy)
    template = load_template(cfg.template)
    pcfg = cfg.prompt_config()
    n = 0
    for chain in read_chains(cfg.out / "chains.jsonl"):
        bundle = render_prompt(template, chain.trajectory, render_mobility_info(chain, taxonomy), pcfg)
        req = LlmRequest(bundle.text, cfg.model, cfg.temperature, cfg.max_tokens)
        write_fixture(cfg.backend.fixture_dir, req, synthesize_answer(chain.trajectory, pcfg))
        n += 1
    return n


if __name__ == "__main__":
    raise SystemExit(main())
