"""Parsing and checking of LLM answers, and the JSON-lines run report.

Expected answer shape, repeated once per scenario::

    Result A:
    Occupational Category: Office worker
    Activity Sequence: [Home, Home, ..., Work]
    Trajectory Description: free text, may span lines

Labels are matched case-insensitively, and markdown decoration around them
(``**bold**``, ``## headings``, list bullets, blockquotes) is ignored.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, ParseFailure
from .prompt import ACTIVITY_TYPES, PromptConfig
from .trajectory import SlottedTrajectory

REGION_LABEL_LIMIT = 2

_DECOR = re.compile(r"^[\s>#*_`\-+]*")
_HEADER = re.compile(r"^result\s+([A-Za-z]|\d{1,2})\s*(?:[:.\-)\]*]|$)[\s*_:]*(.*)$", re.IGNORECASE)
_FIELDS = {
    "occupational_category": re.compile(r"^occupational\s+category[\s*_]*[:\-][\s*_]*(.*)$", re.I),
    "activity_sequence": re.compile(r"^activity\s+sequence[\s*_]*[:\-][\s*_]*(.*)$", re.I),
    "trajectory_description": re.compile(r"^trajectory\s+description[\s*_]*[:\-][\s*_]*(.*)$", re.I),
}
_CANONICAL = {a.lower(): a for a in ACTIVITY_TYPES}


@dataclass(frozen=True)
class InferenceScenario:
    label: str
    occupational_category: str
    activity_sequence: tuple[str, ...]
    trajectory_description: str

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "occupational_category": self.occupational_category,
            "activity_sequence": list(self.activity_sequence),
            "trajectory_description": self.trajectory_description,
        }


@dataclass(frozen=True)
class InferenceResult:
    scenarios: tuple[InferenceScenario, ...]
    raw_text: str
    prompt_hash: str | None = None
    parse_warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScenarioCheck:
    label: str
    category_in_list: bool
    sequence_length_ok: bool
    labels_ok: bool
    region_consistency_ok: bool

    @property
    def outcome(self) -> str:
        if not (self.sequence_length_ok and self.labels_ok):
            return "fail"
        if not (self.category_in_list and self.region_consistency_ok):
            return "warn"
        return "pass"


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ScenarioCheck, ...]

    @property
    def overall(self) -> str:
        outcomes = {c.outcome for c in self.checks}
        for level in ("fail", "warn"):
            if level in outcomes:
                return level
        return "pass"

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "scenarios": [
                {
                    "label": c.label,
                    "category_in_list": c.category_in_list,
                    "sequence_length_ok": c.sequence_length_ok,
                    "labels_ok": c.labels_ok,
                    "region_consistency_ok": c.region_consistency_ok,
                }
                for c in self.checks
            ],
        }


def _strip_decor(line: str) -> str:
    line = _DECOR.sub("", line)
    return line.strip()


def _clean_value(value: str) -> str:
    return value.strip().strip("*_`").strip()


def normalize_activity(label: str) -> str:
    label = label.strip().strip("'\"*_`").strip()
    return _CANONICAL.get(label.lower(), label)


def _split_sequence(text: str) -> tuple[str, ...]:
    inner = text
    if "[" in text:
        inner = text[text.index("[") + 1 :]
        if "]" in inner:
            inner = inner[: inner.index("]")]
    parts = re.split(r",|->|→", inner)
    return tuple(normalize_activity(p) for p in parts if p.strip())


def _match_field(line: str) -> tuple[str, str] | None:
    clean = _strip_decor(line)
    for name, pat in _FIELDS.items():
        m = pat.match(clean)
        if m:
            return name, m.group(1)
    return None


def _parse_block(label: str, lines: list[str], warnings: list[str]) -> InferenceScenario | None:
    fields: dict[str, list[str]] = {}
    current = None
    for line in lines:
        hit = _match_field(line)
        if hit:
            current, first = hit
            fields[current] = [first]
        elif current is not None:
            fields[current].append(line)
    if not fields:
        return None

    category = _clean_value(next((l for l in fields.get("occupational_category", []) if l.strip()), ""))
    seq_lines = fields.get("activity_sequence", [])
    seq_text = ""
    for l in seq_lines:
        seq_text += " " + l
        if "]" in l:
            break
    sequence = _split_sequence(seq_text) if seq_text.strip() else ()
    desc_lines = fields.get("trajectory_description", [])
    description = "\n".join(desc_lines).strip()
    if description:
        first, _, rest = description.partition("\n")
        description = (_clean_value(first) + ("\n" + rest if rest else "")).strip()

    for name in _FIELDS:
        if name not in fields:
            warnings.append(f"result {label}: missing {name.replace('_', ' ')}")
    return InferenceScenario(label, category, sequence, description)


def parse_result(
    text: str, L: int, expected: int = 3, prompt_hash: str | None = None
) -> InferenceResult:
    """Split an answer into scenarios; raises ParseFailure if none is recognizable."""
    if not text or not text.strip():
        raise ParseFailure("empty response", text)
    lines = text.splitlines()
    blocks: list[tuple[str, list[str]]] = []
    preamble: list[str] = []
    for line in lines:
        m = _HEADER.match(_strip_decor(line))
        if m:
            blocks.append((m.group(1).upper(), []))
            tail = m.group(2).strip()
            if tail:
                blocks[-1][1].append(tail)
        elif blocks:
            blocks[-1][1].append(line)
        else:
            preamble.append(line)

    warnings: list[str] = []
    if not blocks:
        blocks = [("A", preamble)]
        warnings.append("no 'Result <label>' headers; read the answer as a single scenario")
    scenarios = []
    for label, body in blocks:
        sc = _parse_block(label, body, warnings)
        if sc is not None:
            scenarios.append(sc)
    if not scenarios:
        raise ParseFailure("no recognizable scenario", text)

    if len(scenarios) != expected:
        warnings.append(f"expected {expected}, found {len(scenarios)}")
    for sc in scenarios:
        if len(sc.activity_sequence) != L:
            warnings.append(f"result {sc.label}: activity sequence has {len(sc.activity_sequence)} labels, expected {L}")
    return InferenceResult(tuple(scenarios), text, prompt_hash, tuple(warnings))


def render_result(scenarios: Iterable[InferenceScenario]) -> str:
    """Inverse of parse_result for well-formed scenarios."""
    blocks = []
    for sc in scenarios:
        blocks.append(
            f"Result {sc.label}:\n"
            f"Occupational Category: {sc.occupational_category}\n"
            f"Activity Sequence: [{', '.join(sc.activity_sequence)}]\n"
            f"Trajectory Description: {sc.trajectory_description}"
        )
    return "\n\n".join(blocks) + "\n"


def validate_result(
    result: InferenceResult, traj: SlottedTrajectory, config: PromptConfig
) -> ValidationReport:
    allowed = set(config.activity_types)
    categories = {c.casefold() for c in config.occupational_categories}
    checks = []
    for sc in result.scenarios:
        seq = sc.activity_sequence
        by_region: dict[int, set[str]] = {}
        for rid, act in zip(traj.regions, seq):
            by_region.setdefault(rid, set()).add(act)
        checks.append(
            ScenarioCheck(
                label=sc.label,
                category_in_list=sc.occupational_category.casefold() in categories,
                sequence_length_ok=len(seq) == traj.L,
                labels_ok=bool(seq) and all(a in allowed for a in seq),
                region_consistency_ok=all(len(v) <= REGION_LABEL_LIMIT for v in by_region.values()),
            )
        )
    return ValidationReport(tuple(checks))


@dataclass
class ReportEntry:
    trajectory_id: str
    result: InferenceResult | None
    validation: ValidationReport | None
    error: str | None = None
    prompt_hash: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def outcome(self) -> str:
        if self.error is not None or self.validation is None:
            return "error"
        return self.validation.overall

    def to_json(self) -> dict:
        rec = {
            "trajectory_id": self.trajectory_id,
            "prompt_hash": self.prompt_hash or (self.result.prompt_hash if self.result else None),
            "outcome": self.outcome,
            "error": self.error,
            "scenarios": [s.to_json() for s in self.result.scenarios] if self.result else [],
            "parse_warnings": list(self.result.parse_warnings) if self.result else [],
            "validation": self.validation.to_json() if self.validation else None,
        }
        rec.update(self.extra)
        return rec


def summarize(entries: Sequence[ReportEntry]) -> dict:
    outcomes = Counter(e.outcome for e in entries)
    labels: Counter[str] = Counter()
    for e in entries:
        if e.result:
            for sc in e.result.scenarios:
                labels.update(sc.activity_sequence)
    return {
        "records": len(entries),
        "outcomes": {k: outcomes.get(k, 0) for k in ("pass", "warn", "fail", "error")},
        "activity_label_counts": dict(sorted(labels.items())),
    }


def format_summary(summary: dict) -> str:
    lines = [f"trajectories: {summary['records']}"]
    for k, v in summary["outcomes"].items():
        lines.append(f"  {k:<6} {v}")
    lines.append("activity label frequency:")
    if not summary["activity_label_counts"]:
        lines.append("  (none)")
    for label, n in summary["activity_label_counts"].items():
        lines.append(f"  {label:<12} {n}")
    return "\n".join(lines) + "\n"


def emit_report(entries: Sequence[ReportEntry], path: str | Path) -> dict:
    """Write the JSON-lines report at ``path`` and a text summary next to it.

    The summary goes to ``<path stem>.summary.txt``. Returns the summary dict.
    """
    path = Path(path)
    summary = summarize(entries)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for e in entries:
                fh.write(json.dumps(e.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
        path.with_suffix(".summary.txt").write_text(format_summary(summary), encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write report {path}: {exc}") from exc
    return summary
