"""Command line front door: serve, prewarm, simulate, metrics, export,
filter-corpus.  Read-side commands work either offline against a config's
storage or as thin clients of a running service via --url."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import httpx

from .config import ServiceConfig, load_config
from .corpus import build_exclusion_index, filter_passages, load_store, save_store
from .errors import ConfigError, PlatformError
from .metrics import format_report_table
from .service import build_platform, dump_caches, serve
from .simulate import load_profiles, run_experiment


def _config_from(args) -> ServiceConfig:
    return load_config(args.config) if args.config else ServiceConfig()


def _offline_platform(args):
    """Platform for read-side commands; --log points at a foreign event log
    whose corpus sits next to it (or is named with --corpus)."""
    config = _config_from(args)
    store = None
    events_path = None
    if getattr(args, "log", None):
        events_path = Path(args.log)
        corpus = Path(args.corpus) if getattr(args, "corpus", None) else events_path.parent / "corpus.ndjson"
        if not corpus.exists():
            raise ConfigError(f"no corpus found at {corpus}; pass --corpus")
        store = load_store(corpus, seed=config.seed)
    return build_platform(config, store=store, events_path=events_path)


def _cmd_serve(args) -> int:
    serve(_config_from(args), host=args.host, port=args.port)
    return 0


def _cmd_prewarm(args) -> int:
    config = _config_from(args)
    platform = build_platform(config)
    summary = platform.prewarm(depth=args.depth)
    written = dump_caches(platform, config)
    for source in sorted(summary):
        line = summary[source]
        print(
            f"{source}: cached {line['cached']} new, "
            f"{len(line['failures'])} failures, {written[source]} queued on disk"
        )
    return 0


def _cmd_simulate(args) -> int:
    profiles = load_profiles(args.profile) if args.profile else None
    result = run_experiment(
        examples_per_setting=args.examples_per_setting,
        profiles=profiles,
        seed=args.seed,
        out_dir=args.out,
        threads=args.threads,
        validator_accuracy=args.validator_accuracy,
        p_wellformed=args.p_wellformed,
    )
    print(result.table)
    for line in result.diagnostics:
        print(f"aborted: {line}", file=sys.stderr)
    return 1 if result.diagnostics else 0


def _cmd_metrics(args) -> int:
    if args.url:
        params = {"setting": args.setting} if args.setting else {}
        body = _get_json(args.url, "/v1/metrics", params)
        if args.json:
            print(json.dumps(body["reports"], indent=2))
        else:
            print(body["table"])
        return 0
    platform = _offline_platform(args)
    reports = platform.metrics_reports(args.setting)
    if args.json:
        print(json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        print(format_report_table(reports))
    return 0


def _cmd_export(args) -> int:
    if args.url:
        body = _get_json(args.url, "/v1/export", {"setting": args.setting})
        document, metadata = body["dataset"], body["metadata"]
    else:
        document, metadata = _offline_platform(args).export(args.setting)
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(document, ensure_ascii=False, indent=2) + "\n")
        sidecar = out.with_suffix(".meta.json")
        sidecar.write_text(json.dumps(metadata, ensure_ascii=False, indent=2) + "\n")
        count = sum(len(p["qas"]) for a in document["data"] for p in a["paragraphs"])
        print(f"wrote {count} examples to {out} (provenance in {sidecar})")
    else:
        print(json.dumps({"dataset": document, "metadata": metadata}, ensure_ascii=False))
    return 0


def _exclusion_texts(path: Path) -> list[str]:
    """Accepts a JSON list of strings, a SQuAD-shaped document, or NDJSON
    records with a text field."""
    raw = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError:
        texts = []
        for line in raw.splitlines():
            line = line.strip()
            if line:
                texts.append(json.loads(line)["text"])
        return texts
    if isinstance(doc, list):
        return [str(t) for t in doc]
    if isinstance(doc, dict) and "data" in doc:
        return [
            para["context"]
            for article in doc["data"]
            for para in article["paragraphs"]
        ]
    raise ConfigError(f"unrecognized exclusion file shape: {path}")


def _cmd_filter_corpus(args) -> int:
    store = load_store(args.input)
    exclusion = None
    if args.exclude:
        texts: list[str] = []
        for path in args.exclude:
            texts.extend(_exclusion_texts(Path(path)))
        exclusion = build_exclusion_index(texts, n=args.ngram)
    kept, report = filter_passages(
        store,
        min_tokens=args.min_tokens,
        max_tokens=args.max_tokens,
        min_tasks=args.min_tasks,
        exclusion=exclusion,
    )
    save_store(kept, args.output)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _get_json(base: str, path: str, params: dict) -> dict:
    response = httpx.get(base.rstrip("/") + path, params=params, timeout=30.0)
    if response.status_code != 200:
        raise ConfigError(f"service returned {response.status_code}: {response.text}")
    return response.json()


def _add_read_side_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--url", help="query a running service instead of local storage")
    parser.add_argument("--log", help="event log to replay (default: the config's)")
    parser.add_argument("--corpus", help="corpus for --log (default: corpus.ndjson beside it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="annoloop")
    parser.add_argument("--config", help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("prewarm", help="fill prompt caches for the whole corpus")
    p.add_argument("--depth", type=int, default=None)
    p.set_defaults(fn=_cmd_prewarm)

    p = sub.add_parser("simulate", help="run the simulated 20-setting experiment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--examples-per-setting", type=int, default=50)
    p.add_argument("--out", default="sim-out", help="output directory")
    p.add_argument("--profile", help="JSON annotator profile file")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--validator-accuracy", type=float, default=0.9)
    p.add_argument("--p-wellformed", type=float, default=0.97)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("metrics", help="print the per-setting metrics table")
    _add_read_side_flags(p)
    p.add_argument("--setting", help="restrict to one setting key")
    p.add_argument("--json", action="store_true", help="raw reports instead of the table")
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("export", help="export one setting's dataset")
    _add_read_side_flags(p)
    p.add_argument("--setting", required=True)
    p.add_argument("--out", help="dataset file; provenance goes to .meta.json")
    p.set_defaults(fn=_cmd_export)

    p = sub.add_parser("filter-corpus", help="length/task/overlap filtering")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--exclude", action="append", help="evaluation set to decontaminate against")
    p.add_argument("--ngram", type=int, default=8)
    p.add_argument("--min-tokens", type=int, default=100)
    p.add_argument("--max-tokens", type=int, default=600)
    p.add_argument("--min-tasks", type=int, default=5)
    p.set_defaults(fn=_cmd_filter_corpus)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (PlatformError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
