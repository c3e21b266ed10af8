"""Build in-memory pipeline pieces from the worked-example fixture."""

from __future__ import annotations

import datetime as dt
from pathlib import Path

from trajsem.chain import build_chain
from trajsem.geo import assign_pois_to_regions, load_pois, load_regions, load_taxonomy
from trajsem.profile import compute_document_frequency, group_weights, profile_regions
from trajsem.sampling import SamplerConfig
from trajsem.trajectory import load_stays, slot_trajectory

EXAMPLE_DATE = dt.date(2021, 11, 1)
GOLDEN_SEED = 7


def example_pieces(d: Path, seed: int = GOLDEN_SEED, K: int = 3):
    tax = load_taxonomy(d / "taxonomy.json")
    reg = load_regions(d / "regions.geojson")
    pois, _ = load_pois(d / "pois.csv", tax)
    hists = assign_pois_to_regions(pois, reg, tax.M)
    profiles, _ = profile_regions(hists)
    q = compute_document_frequency(hists, reg.R)
    grouped = {rid: group_weights(p, tax, q) for rid, p in profiles.items()}
    traj = slot_trajectory(load_stays(d / "stays.csv"), EXAMPLE_DATE)
    chain = build_chain(traj, grouped, SamplerConfig(K=K, seed=seed), reg)
    return tax, reg, grouped, traj, chain
