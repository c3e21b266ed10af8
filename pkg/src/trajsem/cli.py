"""Command line entry point.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .errors import BackendError, ConfigError, TrajsemError
from .pipeline import PipelineConfig, StageError, cmd_format, cmd_infer, cmd_profile, cmd_run, cmd_validate

log = logging.getLogger("trajsem")

# flag dest -> PipelineConfig field
_PATH_FLAGS = ("pois", "regions", "taxonomy", "stays", "template", "categories")
_BACKEND_FLAGS = {"backend": "kind", "parallelism": "parallelism", "cache_dir": "cache_dir", "fixture_dir": "fixture_dir",
                  "endpoint": "endpoint_url", "token_env": "auth_token_env_var", "max_retries": "max_retries"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", help="JSON config file; flags override its values")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir", dest="out_dir")
    g.add_argument("-v", "--verbose", action="store_true")
    p = common.add_argument_group("inputs")
    for name in _PATH_FLAGS:
        p.add_argument(f"--{name}")
    s = common.add_argument_group("formatting")
    s.add_argument("--date", help="only this calendar day (YYYY-MM-DD)")
    s.add_argument("--slots", dest="L", type=int, help="time slots per day (default 24)")
    s.add_argument("-K", dest="K", type=int, help="categories drawn per function group (default 3)")
    s.add_argument("--min-coverage", dest="min_coverage_fraction", type=float)
    s.add_argument("--scenarios", dest="scenario_count", type=int)
    b = common.add_argument_group("llm")
    b.add_argument("--backend", choices=["http_chat", "replay"])
    b.add_argument("--model")
    b.add_argument("--temperature", type=float)
    b.add_argument("--max-tokens", dest="max_tokens", type=int)
    b.add_argument("--parallelism", type=int)
    b.add_argument("--max-retries", dest="max_retries", type=int)
    b.add_argument("--cache-dir", dest="cache_dir")
    b.add_argument("--fixture-dir", dest="fixture_dir")
    b.add_argument("--endpoint")
    b.add_argument("--token-env", dest="token_env", help="name of the env var holding the bearer token")
    o = common.add_argument_group("report")
    o.add_argument("--report-out", dest="report_out", help="copy the report JSON lines here")

    parser = argparse.ArgumentParser(prog="trajsem", description="Trajectory semantic inference pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", parents=[common], help="TF-IDF POI profiles per region")
    sub.add_parser("format", parents=[common], help="slot stays and build trajectory chains")
    sub.add_parser("infer", parents=[common], help="prompt the LLM, parse and validate answers")
    sub.add_parser("validate", parents=[common], help="re-parse stored answers without the LLM")
    sub.add_parser("run", parents=[common], help="profile, format and infer in sequence")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    updates = {}
    for name in (*_PATH_FLAGS, "out_dir", "seed", "date", "L", "K", "min_coverage_fraction",
                 "scenario_count", "model", "temperature", "max_tokens"):
        v = getattr(args, name, None)
        if v is not None:
            updates[name] = str(Path(v).resolve()) if name in _PATH_FLAGS else v
    backend = dataclasses.asdict(cfg.backend)
    for flag, key in _BACKEND_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            backend[key] = v
    updates["backend"] = type(cfg.backend)(**backend)
    cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "profile":
            out = cmd_profile(cfg)
            print(f"profiled {out['regions_profiled']} regions, {len(out['empty_regions'])} empty")
        elif args.command == "format":
            out = cmd_format(cfg)
            print(f"{out['chains']} chains, {len(out['rejected'])} rejected user-days")
        elif args.command in ("infer", "validate", "run"):
            if args.command == "infer":
                res = cmd_infer(cfg)
            elif args.command == "validate":
                res = cmd_validate(cfg)
            else:
                res = cmd_run(cfg)["infer"]
            print(json.dumps(res["summary"], sort_keys=True))
            if args.report_out:
                Path(args.report_out).write_bytes((cfg.out / "report.jsonl").read_bytes())
            if res.get("all_failed"):
                print("error: every LLM request failed", file=sys.stderr)
                return BackendError.exit_code
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc.cause, "exit_code", 1)
    except TrajsemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
