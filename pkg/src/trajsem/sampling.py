"""Group-based POI category sampling.

Each function group's TF-IDF weights go through a softmax and K categories
are drawn with replacement; the per-group draws are concatenated in
``GROUP_ORDER``.

Randomness: every (seed, trajectory, region, group) gets its own PCG64
stream. The stream is seeded through ``numpy.random.SeedSequence`` with
``entropy=seed`` and ``spawn_key=(trajectory_key, region_id mod 2**64,
group_index)``; ``group_index`` is the position of the group in
``GROUP_ORDER`` and ``trajectory_key`` is the first 8 bytes (big endian) of
SHA-256 over the UTF-8 trajectory id. A uniform variate is the top 53 bits of
one raw 64-bit PCG64 output scaled by 2**-53, and a category is picked by
inverse CDF. Only raw bit-generator output is used, so draws do not depend on
numpy's higher-level sampling routines.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyGroup
from .geo import GROUP_ORDER, FunctionGroup
from .profile import GroupedWeights

_U53 = 2.0**-53


@dataclass(frozen=True)
class SamplerConfig:
    K: int = 3
    seed: int = 0
    group_order: tuple[FunctionGroup, ...] = GROUP_ORDER

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if len(self.group_order) != len(FunctionGroup) or set(self.group_order) != set(FunctionGroup):
            raise ValueError("group_order must list each function group exactly once")


@dataclass(frozen=True)
class RegionSample:
    region_id: int
    per_group: Mapping[FunctionGroup, tuple[int, ...]]
    empty_groups: tuple[FunctionGroup, ...] = ()
    flat: tuple[int, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "region_id": self.region_id,
            "per_group": {g.value: list(ids) for g, ids in self.per_group.items()},
            "empty_groups": [g.value for g in self.empty_groups],
            "flat": list(self.flat),
        }

    @classmethod
    def from_json(cls, rec: Mapping) -> "RegionSample":
        per_group = {FunctionGroup.parse(g): tuple(ids) for g, ids in rec["per_group"].items()}
        return cls(
            int(rec["region_id"]),
            per_group,
            tuple(FunctionGroup.parse(g) for g in rec["empty_groups"]),
            tuple(rec["flat"]),
        )


class UniformStream:
    """Uniform doubles in [0, 1) from a raw PCG64 stream."""

    def __init__(self, bitgen: np.random.PCG64):
        self._bitgen = bitgen

    def random(self) -> float:
        return (int(self._bitgen.random_raw()) >> 11) * _U53


def trajectory_key(trajectory_id: str) -> int:
    return int.from_bytes(hashlib.sha256(trajectory_id.encode("utf-8")).digest()[:8], "big")


def make_stream(seed: int, trajectory_id: str, region_id: int, group_index: int) -> UniformStream:
    ss = np.random.SeedSequence(
        entropy=seed,
        spawn_key=(trajectory_key(trajectory_id), region_id % 2**64, group_index),
    )
    return UniformStream(np.random.PCG64(ss))


def softmax_group(weights: Sequence[float]) -> list[float]:
    if len(weights) == 0:
        raise EmptyGroup("softmax over an empty group")
    top = max(weights)
    exps = [math.exp(w - top) for w in weights]
    total = math.fsum(exps)
    return [e / total for e in exps]


def sample_group(
    probs: Sequence[float], category_ids: Sequence[int], K: int, rng: UniformStream
) -> list[int]:
    """K independent categorical draws with replacement (inverse CDF)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if len(probs) != len(category_ids):
        raise ValueError("probs and category_ids differ in length")
    if abs(math.fsum(probs) - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    cdf, acc = [], 0.0
    for p in probs:
        acc += p
        cdf.append(acc)
    last = len(cdf) - 1
    out = []
    for _ in range(K):
        u = rng.random()
        idx = next((i for i, c in enumerate(cdf) if u < c), last)
        out.append(category_ids[idx])
    return out


def sample_region(
    grouped: GroupedWeights, config: SamplerConfig, trajectory_id: str
) -> RegionSample:
    per_group: dict[FunctionGroup, tuple[int, ...]] = {}
    empty = []
    for group in config.group_order:
        members = grouped.per_group.get(group, ())
        if not members:
            per_group[group] = ()
            empty.append(group)
            continue
        ids = [cid for cid, _ in members]
        probs = softmax_group([w for _, w in members])
        rng = make_stream(config.seed, trajectory_id, grouped.region_id, GROUP_ORDER.index(group))
        per_group[group] = tuple(sample_group(probs, ids, config.K, rng))
    flat = tuple(cid for g in config.group_order for cid in per_group[g])
    return RegionSample(grouped.region_id, per_group, tuple(empty), flat)
