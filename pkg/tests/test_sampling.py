import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajsem.errors import EmptyGroup
from trajsem.geo import GROUP_ORDER, FunctionGroup
from trajsem.profile import GroupedWeights
from trajsem.sampling import SamplerConfig, make_stream, sample_group, sample_region, softmax_group


def grouped(rid=1, sizes=(2, 3, 1, 4, 2)):
    per, cid = {}, 0
    for g, n in zip(GROUP_ORDER, sizes):
        per[g] = tuple((cid + j, 0.1 * (j + 1)) for j in range(n))
        cid += n
    return GroupedWeights(rid, per)


def test_softmax_uniform():
    assert softmax_group([0, 0, 0]) == pytest.approx([1 / 3] * 3, abs=1e-15)


def test_softmax_two_values():
    assert softmax_group([1, 2]) == pytest.approx([0.268941, 0.731059], abs=1e-6)


def test_softmax_singleton():
    assert softmax_group([5.2]) == [1.0]


def test_softmax_empty():
    with pytest.raises(EmptyGroup):
        softmax_group([])


weights_st = st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(weights_st, st.floats(-20, 20))
def test_softmax_properties(w, c):
    p = softmax_group(w)
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-12)
    assert all(0 < x <= 1 for x in p)
    shifted = softmax_group([x + c for x in w])
    assert shifted == pytest.approx(p, abs=1e-12)
    for i in range(len(w)):
        for j in range(len(w)):
            if w[i] > w[j]:
                assert p[i] >= p[j]


def test_sample_group_degenerate():
    rng = make_stream(0, "t", 1, 0)
    assert sample_group([1.0], [42], 3, rng) == [42, 42, 42]


def test_sample_group_reproducible():
    draws = [sample_group([0.5, 0.5], [1, 2], 1, make_stream(99, "t", 1, 0)) for _ in range(5)]
    assert all(d == draws[0] for d in draws)


def test_sample_group_rejects_bad_K():
    with pytest.raises(ValueError):
        sample_group([1.0], [1], 0, make_stream(0, "t", 1, 0))


def test_sample_group_frequency():
    rng = make_stream(1, "freq", 1, 0)
    draws = sample_group([0.9, 0.1], ["a", "b"], 10_000, rng)
    assert 0.88 <= draws.count("a") / 10_000 <= 0.92


def test_every_category_reachable():
    w = [0.0, 0.5, 1.0, 3.0]
    p = softmax_group(w)
    n = math.ceil(100 * len(w) / min(p))
    draws = sample_group(p, list(range(len(w))), n, make_stream(5, "reach", 1, 0))
    assert set(draws) == set(range(len(w)))


def test_region_sample_has_N_times_K():
    s = sample_region(grouped(), SamplerConfig(K=3, seed=1), "u/2021-11-01")
    assert len(s.flat) == 15
    assert s.empty_groups == ()


def test_region_sample_flags_empty_group():
    s = sample_region(grouped(sizes=(2, 0, 1, 4, 2)), SamplerConfig(K=3, seed=1), "u")
    assert len(s.flat) == 12
    assert s.empty_groups == (FunctionGroup.WORK,)
    assert s.per_group[FunctionGroup.WORK] == ()


def test_region_sample_membership_and_order():
    g = grouped()
    s = sample_region(g, SamplerConfig(K=4, seed=3), "u")
    pos = 0
    for group in GROUP_ORDER:
        members = {cid for cid, _ in g.per_group[group]}
        chunk = s.flat[pos : pos + 4]
        assert set(chunk) <= members
        assert chunk == s.per_group[group]
        pos += 4


def test_region_sample_reproducible_and_keyed():
    cfg = SamplerConfig(K=3, seed=123)
    a = sample_region(grouped(), cfg, "u1/d")
    assert sample_region(grouped(), cfg, "u1/d") == a
    others = {sample_region(grouped(), SamplerConfig(K=3, seed=s), "u1/d").flat for s in range(20)}
    assert len(others) > 1


def test_stream_golden_values():
    # pins the documented stream construction (SeedSequence + raw PCG64 output)
    rng = make_stream(7, "user/2021-11-01", 365, 2)
    got = [rng.random() for _ in range(3)]
    import numpy as np
    from trajsem.sampling import trajectory_key

    ss = np.random.SeedSequence(7, spawn_key=(trajectory_key("user/2021-11-01"), 365, 2))
    bg = np.random.PCG64(ss)
    assert got == [(int(bg.random_raw()) >> 11) / 2**53 for _ in range(3)]
    # frozen on first run; a change here means chains are no longer reproducible
    assert got == [0.28624179984026354, 0.9206976863617182, 0.3174156998067257]


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(K=0)
    with pytest.raises(ValueError):
        SamplerConfig(group_order=GROUP_ORDER[:4])
    with pytest.raises(ValueError):
        SamplerConfig(seed=-1)
