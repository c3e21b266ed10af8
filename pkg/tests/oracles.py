"""Independent brute-force oracles shared by unit and acceptance tests."""

from __future__ import annotations

import datetime as dt
import math
import random

from trajsem.trajectory import StayRecord

TZ = dt.timezone(dt.timedelta(hours=8))
DAY = dt.date(2021, 11, 3)


def brute_tfidf(counts, all_counts, i):
    """Weight of category i in one region, recomputing q and R from every region's counts."""
    R = len(all_counts)
    q = sum(1 for c in all_counts if c[i] > 0)
    return 0.0 if counts[i] == 0 else counts[i] / sum(counts) * math.log(R / q)


def minute_grid_slots(stays, L):
    """Per-minute dwell counting over one day; stays given as (region, start_min, end_min).

    Minutes may fall outside [0, 1440) to model stays crossing midnight.
    Returns (regions, coverage_minutes) or None when nothing is observed.
    """
    width = 1440 // L
    picks, coverage = [], []
    for l in range(L):
        dwell, first, covered = {}, {}, 0
        for m in range(l * width, (l + 1) * width):
            here = [(r, a) for r, a, b in stays if a <= m < b]
            covered += bool(here)
            for r, a in here:
                dwell[r] = dwell.get(r, 0) + 1
                first[r] = min(first.get(r, a), a)
        coverage.append(covered)
        picks.append(min(dwell, key=lambda r: (-dwell[r], first[r], r)) if dwell else None)
    observed = [p for p in picks if p is not None]
    if not observed:
        return None
    out, prev = [], observed[0]
    for p in picks:
        prev = p if p is not None else prev
        out.append(prev)
    return out, coverage


def to_stays(plan, user="u", day=DAY):
    base = dt.datetime.combine(day, dt.time(0), tzinfo=TZ)
    return [
        StayRecord(user, r, base + dt.timedelta(minutes=a), base + dt.timedelta(minutes=b))
        for r, a, b in plan
    ]


def random_stay_plan(rng: random.Random, grain: int = 15):
    """A few stays on a coarse grid so equal dwell times (ties) are common."""
    plan = []
    for _ in range(rng.randint(1, 7)):
        a = rng.randrange(-120, 1500, grain)
        b = a + rng.randrange(grain, 600, grain)
        if b <= 0 or a >= 1440:
            a, b = 0, grain
        plan.append((rng.choice([3, 5, 8, 13]), a, b))
    return plan


ACTIVITIES = ("Home", "Work", "School", "Leisure", "Other")
_WORDS = ("region", "morning", "office", "stays", "home", "late", "bus", "lunch", "shift", "near", "361", "9:00", "(maybe)", "co-worker's", "and/or")


def random_result_scenarios(rng, L: int = 24, n: int = 3):
    """Grammar-conformant scenarios with single-line free text."""
    out = []
    for i in range(n):
        cat = " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 3))).capitalize()
        seq = tuple(rng.choice(ACTIVITIES) for _ in range(L))
        desc = " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 25))) + rng.choice(("", ".", "!"))
        out.append((chr(ord("A") + i), cat, seq, desc))
    return out


def rule_check(seq, regions, L, category, categories):
    """Re-evaluate the validation rules from scratch: (length, labels, category, consistency)."""
    length_ok = len(seq) == L
    labels_ok = len(seq) > 0 and all(a in ACTIVITIES for a in seq)
    cat_ok = category.lower() in [c.lower() for c in categories]
    seen = {}
    for r, a in zip(regions, seq):
        seen.setdefault(r, []).append(a)
    consistent = max((len(set(v)) for v in seen.values()), default=0) <= 2
    return length_ok, labels_ok, cat_ok, consistent
