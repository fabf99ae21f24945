"""Command-line front end; drives the same orchestrator paths as the API."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import AppConfig
from .errors import GenonetError
from .interpreter import (compute_metrics, parse_event_log, parse_flowmonitor,
                          summarize)
from .retrieval import KnowledgeIndex
from .runtime import AppContext
from .util import canonical_json

logger = logging.getLogger(__name__)


def _index_path(config: AppConfig) -> Path:
    return Path(config.state_dir) / "index.json"


def _load_index(config: AppConfig) -> KnowledgeIndex:
    path = _index_path(config)
    if path.exists():
        return KnowledgeIndex.load(path)
    return KnowledgeIndex()


def cmd_chat(args, config: AppConfig) -> int:
    context = AppContext(config=config)
    session = context.create_session()
    print(f"session {session.session_id} "
          f"(provider={session.provider_mode}, backend={session.backend})")
    print("type a message, or /quit to leave")
    while True:
        try:
            text = input("> ").strip()
        except EOFError:
            break
        if not text:
            continue
        if text in ("/quit", "/exit"):
            break
        try:
            turn = context.post_message(session.session_id, text)
        except GenonetError as exc:
            print(f"error: {exc}")
            continue
        print(turn.reply)
        for artifact in turn.artifacts:
            print()
            print(artifact["source"])
    return 0


def cmd_generate(args, config: AppConfig) -> int:
    context = AppContext(config=config)
    session = context.create_session()
    message = args.prompt
    if args.dialect == "python" and "python" not in message.lower():
        message = f"{message}\n\nDialect: python."
    turn = context.post_message(session.session_id, message)
    if turn.error:
        print(f"error: {turn.error['message']}", file=sys.stderr)
        return 1
    print(turn.reply)
    for artifact in turn.artifacts:
        if args.out:
            Path(args.out).write_text(artifact["source"], "utf-8")
            print(f"script written to {args.out}")
        else:
            print()
            print(artifact["source"])
    return 0


def cmd_run(args, config: AppConfig) -> int:
    from dataclasses import replace
    config = replace(config, executor_backend=args.backend)
    context = AppContext(config=config)
    session = context.create_session(overrides={"backend": args.backend})
    target = args.target
    path = Path(target)
    if path.exists():
        # Pre-existing script file: hand it to the sandbox directly.
        from .codegen import scan_sections, GeneratedArtifact
        from .scenario import RawSpecDraft, normalize_units, spec_hash
        from .sandbox import Limits
        source = path.read_text("utf-8")
        spec = normalize_units(RawSpecDraft())
        artifact = GeneratedArtifact(
            dialect="python" if path.suffix == ".py" else "cpp",
            source=source, sections=scan_sections(source), spec=spec,
            spec_digest=spec_hash(spec))
        limits = Limits(build_timeout_s=args.timeout,
                        run_timeout_s=args.timeout)
        try:
            report = context.execution.execute(artifact, backend=args.backend,
                                               limits=limits)
        except GenonetError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"phase={report.phase} exit={report.exit_status} "
              f"wall={report.wall_time_s:.3f}s")
        sys.stdout.write(report.stdout)
        sys.stderr.write(report.stderr)
        return 0 if report.exit_status == 0 else 1
    turn = context.post_message(session.session_id, f"run {target}")
    if turn.error:
        print(f"error: {turn.error['message']}", file=sys.stderr)
        return 1
    print(turn.reply)
    return 0


def cmd_interpret(args, config: AppConfig) -> int:
    text = Path(args.file).read_text("utf-8")
    if args.kind == "flowmon":
        records = parse_flowmonitor(text)
        metrics = [compute_metrics(r) for r in records]
        print(summarize(metrics=metrics))
        if args.json_out:
            payload = [m.to_dict() for m in metrics]
            Path(args.json_out).write_text(canonical_json(payload), "utf-8")
    else:
        parsed = parse_event_log(text)
        print(summarize(parsed_log=parsed))
        if args.json_out:
            payload = [e.to_dict() for e in parsed.events]
            Path(args.json_out).write_text(canonical_json(payload), "utf-8")
    return 0


def cmd_ingest(args, config: AppConfig) -> int:
    index = _load_index(config)
    counts = index.ingest_directory(args.directory)
    path = _index_path(config)
    path.parent.mkdir(parents=True, exist_ok=True)
    index.save(path)
    for doc_id, count in counts.items():
        print(f"{doc_id}: {count} chunk{'s' if count != 1 else ''}")
    print(f"index saved to {path}")
    return 0


def cmd_search(args, config: AppConfig) -> int:
    index = _load_index(config)
    if index.chunk_count() == 0:
        from .runtime import build_index
        index = build_index(config)
    hits = index.query(args.query, args.k)
    for hit in hits:
        chunk = index.get_chunk(hit.chunk_id)
        first_line = chunk.text.strip().splitlines()[0]
        print(f"{hit.rank:2d}. {hit.chunk_id}  score={hit.score:.6f}  "
              f"{first_line}")
    return 0


def cmd_serve(args, config: AppConfig) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = config.bind_addr.rpartition(":")
    app = create_app(AppContext(config=config))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8470))
    return 0


def cmd_seed_demo(args, config: AppConfig) -> int:
    from .demo import build_demo_cassette
    path = build_demo_cassette(args.cassette)
    print(f"demo cassette written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genonet",
        description="Generative network-simulation workbench")
    parser.add_argument("--verbose", action="store_true",
                        help="enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("chat", help="interactive chat loop")

    p_gen = sub.add_parser("generate", help="generate a simulation script")
    p_gen.add_argument("--prompt", required=True)
    p_gen.add_argument("--dialect", choices=["cpp", "python"], default="cpp")
    p_gen.add_argument("--out", help="write the script to a file")

    p_run = sub.add_parser("run", help="execute a script or a named example")
    p_run.add_argument("target", help="script path or example name")
    p_run.add_argument("--backend", choices=["stub", "ns3"], default="stub")
    p_run.add_argument("--timeout", type=float, default=600.0)

    p_int = sub.add_parser("interpret", help="interpret simulator output")
    p_int.add_argument("kind", choices=["flowmon", "log"])
    p_int.add_argument("file")
    p_int.add_argument("--json-out", help="write machine-readable metrics")

    p_ing = sub.add_parser("ingest", help="ingest a corpus directory")
    p_ing.add_argument("directory")

    p_sea = sub.add_parser("search", help="query the knowledge index")
    p_sea.add_argument("query")
    p_sea.add_argument("-k", type=int, default=5)

    sub.add_parser("serve", help="start the HTTP service")

    p_seed = sub.add_parser("seed-demo",
                            help="record the demo replay cassette")
    p_seed.add_argument("--cassette", required=True)

    return parser


_COMMANDS = {
    "chat": cmd_chat,
    "generate": cmd_generate,
    "run": cmd_run,
    "interpret": cmd_interpret,
    "ingest": cmd_ingest,
    "search": cmd_search,
    "serve": cmd_serve,
    "seed-demo": cmd_seed_demo,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    config = AppConfig.from_env()
    try:
        return _COMMANDS[args.command](args, config)
    except GenonetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
