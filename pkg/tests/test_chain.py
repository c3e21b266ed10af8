import json
import math

import pytest

from trajsem.chain import TrajectoryChain, build_chain, read_chains, render_mobility_info, write_chains
from trajsem.geo import GROUP_ORDER, FunctionGroup, Region, RegionRegistry
from trajsem.profile import GroupedWeights
from trajsem.sampling import SamplerConfig
from trajsem.synthetic import EXAMPLE_SEQUENCE
from trajsem.trajectory import SlottedTrajectory

from conftest import GOLDEN
from helpers import EXAMPLE_DATE, example_pieces
from test_geo import chord_km


def _traj(regions):
    return SlottedTrajectory("u", EXAMPLE_DATE, tuple(regions), (60.0,) * len(regions))


def test_stationary_day(example_dir):
    tax, reg, grouped, _, _ = example_pieces(example_dir)
    chain = build_chain(_traj([161] * 24), grouped, SamplerConfig(seed=1), reg)
    assert chain.records[0].distance_from_prev_km is None
    assert all(r.distance_from_prev_km == 0.0 for r in chain.records[1:])
    assert len({id(r.sample) for r in chain.records}) == 1


def test_example_chain_shape(example_dir):
    tax, reg, grouped, traj, chain = example_pieces(example_dir)
    assert len(chain.records) == 24
    assert [r.region_id for r in chain.records] == list(EXAMPLE_SEQUENCE)
    assert [r.slot_index for r in chain.records] == list(range(24))
    assert all(len(r.sample.flat) == 15 for r in chain.records)
    # one sample per distinct region, reused on every revisit
    by_region = {}
    for r in chain.records:
        assert by_region.setdefault(r.region_id, r.sample) is r.sample


def test_example_chain_distances_match_oracle(example_dir):
    tax, reg, grouped, traj, chain = example_pieces(example_dir)
    for prev, rec in zip(chain.records, chain.records[1:]):
        a, b = reg[prev.region_id].centroid, reg[rec.region_id].centroid
        expected = 0.0 if prev.region_id == rec.region_id else chord_km(*a, *b)
        assert rec.distance_from_prev_km == pytest.approx(expected, abs=1e-9)
        assert (rec.distance_from_prev_km == 0) == (prev.region_id == rec.region_id)


def test_unprofiled_region_does_not_abort():
    reg = RegionRegistry([Region(1, "a", (0.0, 0.0)), Region(2, "b", (0.0, 0.01))])
    gw = GroupedWeights(1, {g: ((i, 0.5),) for i, g in enumerate(GROUP_ORDER)})
    chain = build_chain(_traj([1] * 12 + [2] * 12), {1: gw}, SamplerConfig(), reg)
    assert chain.records[0].sample is not None
    assert chain.records[12].unprofiled
    text = render_mobility_info(chain, _tax5())
    assert "region 2 | POI unprofiled | move 1.11 km" in text


def _tax5():
    from trajsem.geo import Category, CategoryTaxonomy

    return CategoryTaxonomy(tuple(Category(i, f"cat{i}", g) for i, g in enumerate(GROUP_ORDER)))


def test_empty_group_renders_none():
    reg = RegionRegistry([Region(1, "a", (0.0, 0.0))])
    per = {g: ((i, 0.5),) for i, g in enumerate(GROUP_ORDER)}
    per[FunctionGroup.SCHOOL] = ()
    chain = build_chain(_traj([1] * 24), {1: GroupedWeights(1, per)}, SamplerConfig(), reg)
    line = render_mobility_info(chain, _tax5()).splitlines()[0]
    assert "School: none;" in line
    assert "Home: cat0 ×3;" in line
    assert len(chain.records[0].sample.flat) == 12


def test_render_matches_golden(example_dir):
    tax, reg, grouped, traj, chain = example_pieces(example_dir)
    golden = (GOLDEN / "example_mobility_info.txt").read_text(encoding="utf-8")
    assert render_mobility_info(chain, tax) == golden


def test_render_is_deterministic_and_injective(example_dir):
    tax, reg, grouped, traj, chain = example_pieces(example_dir)
    _, _, _, _, again = example_pieces(example_dir)
    assert render_mobility_info(chain, tax) == render_mobility_info(again, tax)
    regions = list(EXAMPLE_SEQUENCE)
    regions[5] = 359
    other = build_chain(_traj(regions), grouped, SamplerConfig(seed=7), reg)
    assert render_mobility_info(other, tax) != render_mobility_info(chain, tax)


def test_chain_jsonl_roundtrip(example_dir, tmp_path):
    tax, reg, grouped, traj, chain = example_pieces(example_dir)
    path = tmp_path / "chains.jsonl"
    write_chains([chain], path, extra={"config_hash": "x"})
    (back,) = read_chains(path)
    assert back == chain
    rec = json.loads(path.read_text())
    # full precision in JSON, 2 decimals only in text
    assert rec["records"][9]["distance_from_prev_km"] == chain.records[9].distance_from_prev_km
    assert render_mobility_info(back, tax) == render_mobility_info(chain, tax)
