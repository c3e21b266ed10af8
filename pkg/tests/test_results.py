import datetime as dt
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajsem.errors import DataError, ParseFailure
from trajsem.prompt import PromptConfig
from trajsem.results import (
    InferenceResult,
    InferenceScenario,
    ReportEntry,
    emit_report,
    normalize_activity,
    parse_result,
    render_result,
    validate_result,
)
from trajsem.synthetic import EXAMPLE_SEQUENCE
from trajsem.trajectory import SlottedTrajectory

from conftest import FIXTURES
from oracles import ACTIVITIES, random_result_scenarios, rule_check

TRAJ = SlottedTrajectory("commuter", dt.date(2021, 11, 1), EXAMPLE_SEQUENCE, 1.0)
CFG = PromptConfig()


def read(name):
    return (FIXTURES / name).read_text(encoding="utf-8")


def test_plain_fixture_three_scenarios_no_warnings():
    r = parse_result(read("result_plain.txt"), 24)
    assert [s.label for s in r.scenarios] == ["A", "B", "C"]
    assert r.parse_warnings == ()
    assert r.scenarios[0].occupational_category == "Office worker"
    assert r.scenarios[2].activity_sequence[:10] == ("Home",) * 9 + ("Work",)
    assert r.scenarios[1].trajectory_description == "Lives in region 161 and attends classes in region 365."


def test_markdown_fixture_tolerated():
    text = read("worked_example/response.md")
    r = parse_result(text, 24)
    assert len(r.scenarios) == 3 and r.parse_warnings == ()
    assert r.raw_text == text
    b = r.scenarios[1]
    assert b.occupational_category == "Retail/Service worker"
    assert set(b.activity_sequence) <= set(ACTIVITIES)  # lowercase labels normalized
    assert r.scenarios[0].trajectory_description.startswith("The individual is most likely an **office worker**.")
    assert r.scenarios[0].trajectory_description.endswith("white-collar employees.")


@pytest.mark.parametrize("text", ["", "   \n\t"])
def test_empty_raises(text):
    with pytest.raises(ParseFailure) as exc:
        parse_result(text, 24)
    assert exc.value.raw_text == text


def test_prose_only_raises_with_raw_text():
    text = "I'm sorry, I cannot determine the activities for this person.\n"
    with pytest.raises(ParseFailure) as exc:
        parse_result(text, 24)
    assert exc.value.raw_text == text


def test_two_of_three():
    r = parse_result(read("result_two.txt"), 24, expected=3)
    assert len(r.scenarios) == 2
    assert "expected 3, found 2" in r.parse_warnings


def test_heading_variants():
    text = (
        "## Result 1\n- occupational category - Teacher\n- ACTIVITY SEQUENCE: [home, WORK]\n"
        "- Trajectory description: short\n\n### result b.\noccupational category: Student\n"
        "activity sequence: [School,\n School]\ntrajectory description: two\nlines\n"
    )
    r = parse_result(text, 2, expected=2)
    assert r.parse_warnings == ()
    assert r.scenarios[0].label == "1" and r.scenarios[0].activity_sequence == ("Home", "Work")
    assert r.scenarios[1].activity_sequence == ("School", "School")
    assert r.scenarios[1].trajectory_description == "two\nlines"


def test_result_of_is_not_a_header():
    text = "Result of the analysis below.\nResult A:\nOccupational Category: X\nActivity Sequence: [Home]\nTrajectory Description: d\n"
    r = parse_result(text, 1, expected=1)
    assert [s.label for s in r.scenarios] == ["A"]


def test_normalize_activity():
    assert normalize_activity(" leisure ") == "Leisure"
    assert normalize_activity("'OTHER'") == "Other"
    assert normalize_activity("Shopping") == "Shopping"


def _result(seq, category="Office worker"):
    sc = InferenceScenario("A", category, tuple(seq), "d")
    return InferenceResult((sc,), "raw")


def test_validate_short_sequence_fails():
    rep = validate_result(_result(["Home"] * 23), TRAJ, CFG)
    assert rep.overall == "fail" and rep.checks[0].sequence_length_ok is False


def test_validate_unknown_label_fails():
    seq = ["Home"] * 23 + ["Shopping"]
    rep = validate_result(_result(seq), TRAJ, CFG)
    assert rep.overall == "fail" and rep.checks[0].labels_ok is False
    assert rep.checks[0].sequence_length_ok is True


def test_validate_all_pass_fixture_agrees_with_rule_oracle():
    r = parse_result(read("result_plain.txt"), 24)
    rep = validate_result(r, TRAJ, CFG)
    assert rep.overall == "pass"
    for sc, chk in zip(r.scenarios, rep.checks):
        expected = rule_check(sc.activity_sequence, TRAJ.regions, 24, sc.occupational_category, CFG.occupational_categories)
        assert (chk.sequence_length_ok, chk.labels_ok, chk.category_in_list, chk.region_consistency_ok) == expected
        assert expected == (True, True, True, True)


def test_validate_unknown_category_warns():
    seq = parse_result(read("result_plain.txt"), 24).scenarios[0].activity_sequence
    rep = validate_result(_result(seq, "Astronaut"), TRAJ, CFG)
    assert rep.overall == "warn" and rep.checks[0].category_in_list is False


def test_validate_region_inconsistency_warns():
    # markdown fixture, scenario B: region 365 labelled Work, Leisure and Other
    r = parse_result(read("worked_example/response.md"), 24)
    rep = validate_result(r, TRAJ, CFG)
    assert [c.outcome for c in rep.checks] == ["pass", "warn", "pass"]
    assert rep.checks[1].region_consistency_ok is False
    assert rep.overall == "warn"


def test_validate_matches_oracle_on_random_input():
    rng = random.Random(3)
    for _ in range(100):
        L = rng.choice([23, 24, 25])
        seq = [rng.choice(ACTIVITIES + ("Shopping",)) if rng.random() < 0.05 else rng.choice(ACTIVITIES) for _ in range(L)]
        cat = rng.choice(CFG.occupational_categories + ("Pilot",))
        chk = validate_result(_result(seq, cat), TRAJ, CFG).checks[0]
        got = (chk.sequence_length_ok, chk.labels_ok, chk.category_in_list, chk.region_consistency_ok)
        assert got == rule_check(seq, TRAJ.regions, 24, cat, CFG.occupational_categories)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=1, max_value=48), st.integers(min_value=1, max_value=5))
def test_round_trip(seed, L, n):
    scenarios = random_result_scenarios(random.Random(seed), L, n)
    r = parse_result(render_result(InferenceScenario(*s) for s in scenarios), L, expected=n)
    assert r.parse_warnings == ()
    assert [(s.label, s.occupational_category, s.activity_sequence, s.trajectory_description) for s in r.scenarios] == scenarios


def _entry(tid, text):
    r = parse_result(text, 24)
    return ReportEntry(tid, r, validate_result(r, TRAJ, CFG), prompt_hash="h" + tid)


def test_emit_report_empty(tmp_path):
    summary = emit_report([], tmp_path / "report.jsonl")
    assert (tmp_path / "report.jsonl").read_text() == ""
    assert summary["records"] == 0 and set(summary["outcomes"].values()) == {0}
    assert "trajectories: 0" in (tmp_path / "report.summary.txt").read_text()


def test_emit_report_recount(tmp_path):
    entries = [
        _entry("a", read("result_plain.txt")),
        _entry("b", read("worked_example/response.md")),
        ReportEntry("c", None, None, error="FixtureMissing: no fixture"),
    ]
    path = tmp_path / "sub" / "report.jsonl"
    summary = emit_report(entries, path)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(records) == 3
    recount = {k: sum(r["outcome"] == k for r in records) for k in ("pass", "warn", "fail", "error")}
    assert recount == summary["outcomes"] == {"pass": 1, "warn": 1, "fail": 0, "error": 1}
    labels = {}
    for r in records:
        for sc in r["scenarios"]:
            for a in sc["activity_sequence"]:
                labels[a] = labels.get(a, 0) + 1
    assert labels == summary["activity_label_counts"]
    assert sum(labels.values()) == 6 * 24
    assert records[0]["prompt_hash"] == "ha"
    text = (tmp_path / "sub" / "report.summary.txt").read_text()
    assert "pass   1" in text and "error  1" in text


def test_emit_report_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(DataError):
        emit_report([], blocker / "report.jsonl")
