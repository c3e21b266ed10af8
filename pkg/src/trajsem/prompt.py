"""Sectioned prompt templates and rendering.

Template file grammar::

    # lines starting with '#' before the first header are comments
    [placeholders]
    trajectory_seq
    mobility_info
    ...
    [section: aims]
    body text with {{trajectory_seq}} style tokens
    [section: data_description]
    ...

The four sections ``aims``, ``data_description``, ``cot_reasoning`` and
``output_guidance`` must each appear once, in that order. Every ``{{name}}``
token in a body must be declared under ``[placeholders]`` and must be one of
``PLACEHOLDERS``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError
from .trajectory import SlottedTrajectory

SECTION_NAMES = ("aims", "data_description", "cot_reasoning", "output_guidance")
SECTION_TITLES = {
    "aims": "Aims",
    "data_description": "Data Description",
    "cot_reasoning": "Step-by-Step Reasoning",
    "output_guidance": "Output Format",
}
PLACEHOLDERS = frozenset(
    {
        "trajectory_seq",
        "mobility_info",
        "occupational_category",
        "activity_type",
        "scenario_count",
        "scenario_labels",
        "sequence_length",
    }
)
ACTIVITY_TYPES = ("Home", "Work", "School", "Leisure", "Other")
DEFAULT_OCCUPATIONS = (
    "Office worker",
    "Student",
    "Teacher",
    "Retail/Service worker",
    "Healthcare worker",
    "Driver/Courier",
    "Freelancer",
    "Retiree/Homemaker",
)

_TOKEN = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")
_ANGLE = re.compile(r"<(" + "|".join(sorted(PLACEHOLDERS)) + r"|trjactory_seq)>")
_HEADER = re.compile(r"^\[(placeholders|section:\s*([A-Za-z_]+))\]\s*$")


@dataclass(frozen=True)
class PromptTemplate:
    sections: tuple[tuple[str, str], ...]
    placeholders: frozenset[str]

    def serialize(self) -> str:
        lines = ["[placeholders]", *sorted(self.placeholders)]
        for name, body in self.sections:
            lines.append(f"[section: {name}]")
            lines.append(body)
        return "\n".join(lines) + "\n"

    @property
    def template_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PromptConfig:
    occupational_categories: tuple[str, ...] = DEFAULT_OCCUPATIONS
    scenario_count: int = 3
    activity_types: tuple[str, ...] = field(default=ACTIVITY_TYPES, init=False)

    def __post_init__(self):
        cats = tuple(self.occupational_categories)
        object.__setattr__(self, "occupational_categories", cats)
        if not cats:
            raise ConfigError("occupational category list is empty")
        if len(set(cats)) != len(cats):
            raise ConfigError("occupational categories must be unique")
        if any(not c.strip() for c in cats):
            raise ConfigError("occupational categories must be non-blank")
        if not 1 <= self.scenario_count <= 26:
            raise ConfigError("scenario_count must be between 1 and 26")

    @property
    def scenario_labels(self) -> tuple[str, ...]:
        return tuple(chr(ord("A") + i) for i in range(self.scenario_count))

    def to_json(self) -> dict:
        return {
            "occupational_categories": list(self.occupational_categories),
            "activity_types": list(self.activity_types),
            "scenario_count": self.scenario_count,
        }


@dataclass(frozen=True)
class PromptBundle:
    text: str
    inputs: Mapping[str, object]
    template_hash: str

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def parse_template(text: str, source: str = "<template>") -> PromptTemplate:
    declared: set[str] = set()
    sections: list[tuple[str, list[str]]] = []
    mode = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _HEADER.match(line.strip()) if line.startswith("[") else None
        if m:
            if m.group(2):
                name = m.group(2)
                if name not in SECTION_NAMES:
                    raise ConfigError(f"{source}:{lineno}: unknown section {name!r}")
                if any(n == name for n, _ in sections):
                    raise ConfigError(f"{source}:{lineno}: duplicate section {name!r}")
                sections.append((name, []))
                mode = "section"
            else:
                mode = "placeholders"
            continue
        if mode is None:
            if line.strip() and not line.lstrip().startswith("#"):
                raise ConfigError(f"{source}:{lineno}: text before the first header")
        elif mode == "placeholders":
            if line.strip():
                declared.add(line.strip())
        else:
            sections[-1][1].append(line)

    unknown = sorted(declared - PLACEHOLDERS)
    if unknown:
        raise ConfigError(f"{source}: unknown placeholder(s) declared: {', '.join(unknown)}")
    names = [n for n, _ in sections]
    missing = [n for n in SECTION_NAMES if n not in names]
    if missing:
        raise ConfigError(f"{source}: missing section(s): {', '.join(missing)}")
    if names != list(SECTION_NAMES):
        raise ConfigError(f"{source}: sections out of order: {names}")

    built = []
    for name, body_lines in sections:
        body = "\n".join(body_lines).strip("\n")
        for token in _TOKEN.findall(body):
            if token not in PLACEHOLDERS:
                raise ConfigError(f"{source}: section {name}: unknown placeholder {token!r}")
            if token not in declared:
                raise ConfigError(f"{source}: section {name}: undeclared placeholder {token!r}")
        angle = _ANGLE.search(body)
        if angle:
            raise ConfigError(
                f"{source}: section {name}: use {{{{{angle.group(1)}}}}} instead of {angle.group(0)}"
            )
        built.append((name, body))
    return PromptTemplate(tuple(built), frozenset(declared))


def load_template(path: str | Path | None = None) -> PromptTemplate:
    """Load a template file; with no path, the packaged default."""
    if path is None:
        text = resources.files("trajsem").joinpath("templates/default.txt").read_text("utf-8")
        return parse_template(text, "default.txt")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read template {path}: {exc}") from exc
    return parse_template(text, str(path))


def load_categories(path: str | Path) -> tuple[str, ...]:
    """Occupational categories from a JSON list or a one-per-line text file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read category list {path}: {exc}") from exc
    if path.suffix == ".json":
        cats = json.loads(text)
        if not isinstance(cats, list):
            raise ConfigError(f"{path}: expected a JSON list of strings")
        return tuple(str(c) for c in cats)
    return tuple(line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#"))


def find_unresolved(text: str) -> list[str]:
    """Placeholder tokens (``{{x}}`` or ``<x>``) still present in ``text``."""
    return [m.group(0) for m in _TOKEN.finditer(text)] + [m.group(0) for m in _ANGLE.finditer(text)]


def format_sequence(regions: Sequence[int]) -> str:
    return "[" + ", ".join(str(r) for r in regions) + "]"


def render_prompt(
    template: PromptTemplate,
    traj: SlottedTrajectory,
    mobility_info: str,
    config: PromptConfig,
) -> PromptBundle:
    if not mobility_info.strip():
        raise ConfigError("mobility_info is empty")
    values = {
        "trajectory_seq": format_sequence(traj.regions),
        "mobility_info": mobility_info.rstrip("\n"),
        "occupational_category": "\n".join(f"- {c}" for c in config.occupational_categories),
        "activity_type": ", ".join(config.activity_types),
        "scenario_count": str(config.scenario_count),
        "scenario_labels": ", ".join(config.scenario_labels),
        "sequence_length": str(traj.L),
    }
    missing = sorted(template.placeholders - values.keys())
    if missing:
        raise ConfigError(f"no value for placeholder(s): {', '.join(missing)}")

    def fill(m: re.Match) -> str:
        return values[m.group(1)]

    parts = []
    for name, body in template.sections:
        parts.append(f"## {SECTION_TITLES[name]}\n{_TOKEN.sub(fill, body)}")
    text = "\n\n".join(parts) + "\n"
    leftover = find_unresolved(text)
    if leftover:
        raise ConfigError(f"unresolved placeholders in rendered prompt: {leftover}")
    inputs = {
        "trajectory_seq": values["trajectory_seq"],
        "mobility_info": mobility_info,
        "config": config.to_json(),
    }
    return PromptBundle(text, inputs, template.template_hash)
