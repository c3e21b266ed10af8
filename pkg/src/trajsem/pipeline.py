"""Pipeline stages. Each stage reads its inputs from files and writes its outputs to ``out_dir``.

Output layout::

    profiles.jsonl         one TF-IDF profile per non-empty region
    profile_stats.json     R, M, document frequencies, empty regions, rejected POI rows
    chains.jsonl           one trajectory chain per accepted user-day
    rejected.jsonl         user-days dropped by the coverage gate or slotting
    mobility_info/<id>.txt rendered chain text
    prompts/<id>.txt       rendered prompt
    responses/<id>.txt     raw LLM answer, verbatim
    report.jsonl           per-trajectory parse/validation outcome
    report.summary.txt     counts and label frequencies
    manifest.json          provenance hashes plus a digest of every file above

Every JSON record carries ``config_hash`` and ``template_hash``.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .chain import build_chain, read_chains, render_mobility_info, write_chains
from .errors import BackendError, ConfigError, DataError, EmptyDay, ParseFailure
from .gateway import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, BackendConfig, LlmGateway, LlmRequest
from .geo import assign_pois_to_regions, load_pois, load_regions, load_taxonomy
from .profile import group_weights, profile_regions, read_profiles, write_profiles
from .prompt import DEFAULT_OCCUPATIONS, PromptConfig, load_categories, load_template, render_prompt
from .results import ReportEntry, emit_report, parse_result, validate_result
from .sampling import SamplerConfig
from .trajectory import group_user_days, load_stays, slot_trajectory, validate_trajectory

log = logging.getLogger(__name__)

PATH_KEYS = ("pois", "regions", "taxonomy", "stays", "template", "categories", "out_dir")


@dataclass
class PipelineConfig:
    pois: str | None = None
    regions: str | None = None
    taxonomy: str | None = None
    stays: str | None = None
    template: str | None = None
    categories: str | None = None
    out_dir: str = "out"
    L: int = 24
    K: int = 3
    seed: int = 0
    date: str | None = None
    min_coverage_fraction: float = 0.5
    scenario_count: int = 3
    model: str = "gpt-4"
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    backend: BackendConfig = field(default_factory=lambda: BackendConfig(kind="replay", fixture_dir="fixtures"))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_dir: Path | None = None) -> "PipelineConfig":
        raw = dict(raw)
        paths = raw.pop("paths", {}) or {}
        backend_raw = dict(raw.pop("backend", {}) or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known | (set(paths) - set(PATH_KEYS)))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kw = {**raw, **paths}
        if base_dir is not None:
            for k in PATH_KEYS:
                if kw.get(k):
                    kw[k] = str((base_dir / kw[k]).resolve()) if not Path(kw[k]).is_absolute() else kw[k]
            for k in ("fixture_dir", "cache_dir"):
                v = backend_raw.get(k)
                if v and not Path(v).is_absolute():
                    backend_raw[k] = str((base_dir / v).resolve())
        try:
            if backend_raw:
                kw["backend"] = BackendConfig(**backend_raw)
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def validate(self) -> None:
        if self.L < 1 or 1440 % self.L:
            raise ConfigError(f"L={self.L} must divide 1440 minutes")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if not 0.0 <= self.min_coverage_fraction <= 1.0:
            raise ConfigError("min_coverage_fraction must be within [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.date:
            try:
                dt.date.fromisoformat(self.date)
            except ValueError as exc:
                raise ConfigError(f"bad date {self.date!r}") from exc

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    def prompt_config(self) -> PromptConfig:
        cats = load_categories(self.categories) if self.categories else DEFAULT_OCCUPATIONS
        return PromptConfig(cats, self.scenario_count)

    def snapshot(self) -> dict:
        """Location-independent description of the run: parameters plus input file digests."""
        inputs = {}
        for k in ("pois", "regions", "taxonomy", "stays", "template", "categories"):
            p = getattr(self, k)
            inputs[k] = _file_digest(Path(p)) if p and Path(p).is_file() else None
        return {
            "L": self.L,
            "K": self.K,
            "seed": self.seed,
            "date": self.date,
            "min_coverage_fraction": self.min_coverage_fraction,
            "scenario_count": self.scenario_count,
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "backend_kind": self.backend.kind,
            "inputs": inputs,
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def safe_name(trajectory_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", trajectory_id)


def _require(cfg: PipelineConfig, *keys: str) -> None:
    missing = [k for k in keys if not getattr(cfg, k)]
    if missing:
        raise ConfigError(f"missing path(s) in config: {', '.join(missing)}")


def _provenance(cfg: PipelineConfig) -> dict:
    return {"config_hash": cfg.config_hash, "template_hash": load_template(cfg.template).template_hash}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_manifest(cfg: PipelineConfig) -> None:
    out = cfg.out
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[p.relative_to(out).as_posix()] = _file_digest(p)
    _write_json(out / "manifest.json", {**_provenance(cfg), "config": cfg.snapshot(), "files": files})


def cmd_profile(cfg: PipelineConfig) -> dict:
    _require(cfg, "pois", "regions", "taxonomy")
    prov = _provenance(cfg)
    taxonomy = load_taxonomy(cfg.taxonomy)
    registry = load_regions(cfg.regions)
    pois, poi_summary = load_pois(cfg.pois, taxonomy)
    hists = assign_pois_to_regions(pois, registry, taxonomy.M)
    profiles, empty = profile_regions(hists)
    q = [sum(1 for h in hists.values() if h.counts[i] > 0) for i in range(taxonomy.M)]

    cfg.out.mkdir(parents=True, exist_ok=True)
    write_profiles(profiles.values(), cfg.out / "profiles.jsonl", extra=prov)
    stats = {
        **prov,
        "R": registry.R,
        "M": taxonomy.M,
        "document_frequency": q,
        "regions_profiled": len(profiles),
        "empty_regions": empty,
        "pois_accepted": poi_summary.accepted,
        "pois_rejected": [{"row": r, "reason": why} for r, why in poi_summary.rejected],
    }
    _write_json(cfg.out / "profile_stats.json", stats)
    write_manifest(cfg)
    log.info("profiled %d regions (%d empty)", len(profiles), len(empty))
    return stats


def cmd_format(cfg: PipelineConfig) -> dict:
    _require(cfg, "regions", "taxonomy", "stays")
    out = cfg.out
    stats_path = out / "profile_stats.json"
    if not (out / "profiles.jsonl").exists() or not stats_path.exists():
        raise DataError(f"profiles missing in {out}; run the profile stage first")
    prov = _provenance(cfg)
    taxonomy = load_taxonomy(cfg.taxonomy)
    registry = load_regions(cfg.regions)
    q = json.loads(stats_path.read_text(encoding="utf-8"))["document_frequency"]
    profiles = read_profiles(out / "profiles.jsonl", taxonomy.M)
    grouped = {rid: group_weights(p, taxonomy, q) for rid, p in profiles.items()}
    sampler = SamplerConfig(K=cfg.K, seed=cfg.seed)

    stays = load_stays(cfg.stays, registry.ids())
    day = dt.date.fromisoformat(cfg.date) if cfg.date else None
    chains, rejected = [], []
    for (user, date), day_stays in group_user_days(stays, day).items():
        tid = f"{user}/{date.isoformat()}"
        try:
            traj = slot_trajectory(day_stays, date, cfg.L)
        except EmptyDay as exc:
            rejected.append({"trajectory_id": tid, "reason": str(exc)})
            continue
        verdict = validate_trajectory(traj, cfg.min_coverage_fraction)
        if not verdict.accepted:
            rejected.append({"trajectory_id": tid, "reason": verdict.reason})
            continue
        chains.append(build_chain(traj, grouped, sampler, registry))

    info_dir = out / "mobility_info"
    info_dir.mkdir(parents=True, exist_ok=True)
    for old in info_dir.glob("*.txt"):
        old.unlink()
    write_chains(chains, out / "chains.jsonl", extra=prov)
    for c in chains:
        (info_dir / f"{safe_name(c.trajectory_id)}.txt").write_text(
            render_mobility_info(c, taxonomy), encoding="utf-8", newline="\n"
        )
    with open(out / "rejected.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for r in rejected:
            fh.write(json.dumps({**r, **prov}, sort_keys=True) + "\n")
    write_manifest(cfg)
    log.info("formatted %d chains, rejected %d user-days", len(chains), len(rejected))
    return {"chains": len(chains), "rejected": rejected}


def _clear(d: Path) -> None:
    d.mkdir(parents=True, exist_ok=True)
    for old in d.glob("*.txt"):
        old.unlink()


def _evaluate(chains, texts: Mapping[str, str | Exception], hashes: Mapping[str, str], pcfg: PromptConfig, prov) -> list[ReportEntry]:
    entries = []
    for c in chains:
        tid = c.trajectory_id
        got = texts[tid]
        if isinstance(got, Exception):
            entries.append(ReportEntry(tid, None, None, f"{type(got).__name__}: {got}", hashes.get(tid), dict(prov)))
            continue
        try:
            result = parse_result(got, c.trajectory.L, pcfg.scenario_count, hashes.get(tid))
        except ParseFailure as exc:
            entries.append(ReportEntry(tid, None, None, f"ParseFailure: {exc}", hashes.get(tid), dict(prov)))
            continue
        entries.append(ReportEntry(tid, result, validate_result(result, c.trajectory, pcfg), None, hashes.get(tid), dict(prov)))
    return entries


def cmd_infer(cfg: PipelineConfig, gateway: LlmGateway | None = None) -> dict:
    _require(cfg, "taxonomy")
    out = cfg.out
    chains = read_chains(out / "chains.jsonl")
    prov = _provenance(cfg)
    taxonomy = load_taxonomy(cfg.taxonomy)
    template = load_template(cfg.template)
    pcfg = cfg.prompt_config()
    gateway = gateway or LlmGateway(cfg.backend)
    gateway.check()

    prompt_dir, resp_dir = out / "prompts", out / "responses"
    _clear(prompt_dir)
    _clear(resp_dir)
    requests, hashes = [], {}
    for c in chains:
        bundle = render_prompt(template, c.trajectory, render_mobility_info(c, taxonomy), pcfg)
        (prompt_dir / f"{safe_name(c.trajectory_id)}.txt").write_text(bundle.text, encoding="utf-8", newline="\n")
        hashes[c.trajectory_id] = bundle.content_hash
        requests.append(LlmRequest(bundle.text, cfg.model, cfg.temperature, cfg.max_tokens))

    texts: dict[str, str | Exception] = {}
    if requests:
        for c, (_, resp) in zip(chains, gateway.batch_infer(requests)):
            if isinstance(resp, Exception):
                texts[c.trajectory_id] = resp
                continue
            texts[c.trajectory_id] = resp.text
            (resp_dir / f"{safe_name(c.trajectory_id)}.txt").write_text(resp.text, encoding="utf-8", newline="")

    entries = _evaluate(chains, texts, hashes, pcfg, prov)
    summary = emit_report(entries, out / "report.jsonl")
    write_manifest(cfg)
    backend_failures = sum(isinstance(t, BackendError) for t in texts.values())
    return {
        "summary": summary,
        "backend_failures": backend_failures,
        "all_failed": bool(chains) and backend_failures == len(chains),
        "stats": {"backend_calls": gateway.stats.backend_calls, "cache_hits": gateway.stats.cache_hits},
    }


def cmd_validate(cfg: PipelineConfig) -> dict:
    """Re-parse and re-validate stored raw responses without calling the backend."""
    out = cfg.out
    chains = read_chains(out / "chains.jsonl")
    prov = _provenance(cfg)
    pcfg = cfg.prompt_config()
    texts: dict[str, str | Exception] = {}
    hashes = {}
    for c in chains:
        name = safe_name(c.trajectory_id)
        rp, pp = out / "responses" / f"{name}.txt", out / "prompts" / f"{name}.txt"
        if pp.exists():
            hashes[c.trajectory_id] = hashlib.sha256(pp.read_bytes()).hexdigest()
        if rp.exists():
            texts[c.trajectory_id] = rp.read_bytes().decode("utf-8")
        else:
            texts[c.trajectory_id] = DataError(f"no stored response for {c.trajectory_id}")
    entries = _evaluate(chains, texts, hashes, pcfg, prov)
    summary = emit_report(entries, out / "report.jsonl")
    write_manifest(cfg)
    return {"summary": summary}


STAGES = (("profile", cmd_profile), ("format", cmd_format), ("infer", cmd_infer))


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' (cmd_{stage}) failed: {cause}")
        self.stage = stage
        self.cause = cause


def cmd_run(cfg: PipelineConfig, gateway: LlmGateway | None = None) -> dict:
    results = {}
    for name, fn in STAGES:
        try:
            results[name] = fn(cfg, gateway) if name == "infer" else fn(cfg)
        except (ConfigError, DataError, BackendError) as exc:
            raise StageError(name, exc) from exc
    return results
