"""Batch entry points.

Subcommands: validate-bundle, interpret (offline pipeline debugging),
evaluate (metrics over a dataset), serve (HTTP service), cache record /
cache inspect (replay-cache tooling). Exit codes: 0 success, 1 runtime
failure with a diagnostic on stderr, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from sketchedit.bundle import BundleError, MetadataBundle, load_bundle
from sketchedit.core import ValidationError, rect_to_pixels
from sketchedit.engine import (
    CommandRecord,
    Project,
    new_project,
    submit_command,
)
from sketchedit.evaluation import (
    load_dataset,
    render_report,
    report_to_dict,
    run_evaluation,
)
from sketchedit.parsing import command_from_dict, command_to_dict, parsed_to_dict
from sketchedit.providers import (
    LiveConfig,
    LiveProvider,
    OracleProvider,
    Provider,
    ProviderError,
    RecordingProvider,
    ReplayProvider,
)
from sketchedit.serde import canonical_json, params_to_dict
from sketchedit.service import ConfigError, load_config, serve

logger = logging.getLogger(__name__)

INTERPRET_FORMAT = "sketchedit-interpretation"
INTERPRET_VERSION = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchedit",
        description="Interpret sketched video-edit commands and measure the results.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log at DEBUG level"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate-bundle", help="check a metadata bundle document")
    p.add_argument("path", type=Path)

    p = sub.add_parser(
        "interpret",
        help="run the pipeline over a command list and emit one record each",
    )
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--commands", type=Path, required=True)
    p.add_argument("--replay", type=Path, help="answer provider calls from this cache")
    p.add_argument("--out", type=Path, help="write the document here instead of stdout")
    p.add_argument("--format", choices=("json", "text"), default="json")

    p = sub.add_parser("evaluate", help="score the pipeline against a dataset")
    p.add_argument("--bundle-dir", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--replay", type=Path, help="answer provider calls from this cache")
    p.add_argument("--report", type=Path, help="also write the machine-readable report")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", type=Path, help="JSON config file")

    p = sub.add_parser("cache", help="replay-cache tooling")
    cache_sub = p.add_subparsers(dest="cache_command", required=True)

    rec = cache_sub.add_parser(
        "record", help="run interpret while journaling every provider exchange"
    )
    rec.add_argument("--bundle", type=Path, required=True)
    rec.add_argument("--commands", type=Path, required=True)
    rec.add_argument("--out", type=Path, required=True)
    rec.add_argument("--live-config", type=Path, help="record over a live provider")

    ins = cache_sub.add_parser("inspect", help="summarize a replay cache file")
    ins.add_argument("path", type=Path)

    return parser


# ---------------------------------------------------------------------------
# Shared plumbing.


def _read_bundle(path: Path) -> MetadataBundle:
    return load_bundle(path.read_bytes())


def _read_commands(path: Path) -> list[dict]:
    doc = json.loads(path.read_text("utf-8"))
    if isinstance(doc, dict):
        doc = doc.get("commands")
    if not isinstance(doc, list):
        raise ValidationError(f"{path}: expected a list under 'commands'")
    return doc


def _oracle_for(bundles: Sequence[MetadataBundle]) -> OracleProvider:
    provider = OracleProvider()
    for bundle in bundles:
        provider.add_bundle(bundle)
    return provider


def _interpret_provider(args, bundle: MetadataBundle) -> Provider:
    if args.replay is not None:
        return ReplayProvider(args.replay)
    return _oracle_for([bundle])


def _suggestion_doc(project: Project, edit_id: str) -> dict:
    dims = project.bundle.frame_dims
    for layer in project.layers:
        for edit in layer.edits:
            if edit.id != edit_id:
                continue
            px = rect_to_pixels(edit.rect, dims)
            return {
                "id": edit.id,
                "layer_id": layer.id,
                "operation": edit.operation.value,
                "start_s": edit.interval.start_s,
                "end_s": edit.interval.end_s,
                "rect_px": {"x": px.x, "y": px.y, "w": px.w, "h": px.h},
                "params": params_to_dict(edit.params),
                "status": edit.status.value,
                "temporal_explanation": edit.provenance.temporal_explanation,
                "spatial_method": edit.provenance.spatial_method,
            }
    raise ValidationError(f"suggestion {edit_id} vanished")  # unreachable


def _record_doc(project: Project, record: CommandRecord) -> dict:
    return {
        "id": record.id,
        "command": command_to_dict(record.command),
        "parse": parsed_to_dict(record.parse),
        "suggestions": [
            _suggestion_doc(project, eid) for eid in record.suggestion_ids
        ],
        "summary": record.summary,
        "diagnostics": list(record.diagnostics),
    }


def _interpret(bundle: MetadataBundle, command_docs: list[dict], provider: Provider) -> dict:
    project = new_project(bundle)
    records = []
    for doc in command_docs:
        cmd = command_from_dict(doc)
        record = submit_command(project, cmd, provider)
        records.append(_record_doc(project, record))
    return {
        "format": INTERPRET_FORMAT,
        "version": INTERPRET_VERSION,
        "video_id": bundle.video_id,
        "records": records,
    }


def _render_interpretation(doc: dict) -> str:
    lines = [f"video {doc['video_id']}: {len(doc['records'])} command(s)"]
    for record in doc["records"]:
        lines.append(f"[{record['id']}] {record['command']['text']}")
        lines.append(f"  operations: {', '.join(record['parse']['operations'])}")
        for s in record["suggestions"]:
            px = s["rect_px"]
            lines.append(
                f"  {s['id']}: {s['operation']} "
                f"[{s['start_s']:.3f}, {s['end_s']:.3f}) "
                f"rect({px['x']},{px['y']},{px['w']},{px['h']}) "
                f"via {s['spatial_method']}"
            )
            lines.append(f"      when: {s['temporal_explanation']}")
        for d in record["diagnostics"]:
            lines.append(f"  note: {d}")
        lines.append(f"  summary: {record['summary']}")
    return "\n".join(lines)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        print(text)
    else:
        out.write_text(text + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommand handlers. Each returns an exit code.


def cmd_validate_bundle(args) -> int:
    bundle = _read_bundle(args.path)
    print(
        f"ok: video {bundle.video_id}, {bundle.duration_s:.3f}s, "
        f"{bundle.frame_dims.width_px}x{bundle.frame_dims.height_px}, "
        f"{len(bundle.transcript)} transcript segment(s), "
        f"{len(bundle.clips)} clip(s), {len(bundle.frames)} frame(s)"
    )
    return 0


def cmd_interpret(args) -> int:
    bundle = _read_bundle(args.bundle)
    command_docs = _read_commands(args.commands)
    provider = _interpret_provider(args, bundle)
    doc = _interpret(bundle, command_docs, provider)
    if args.format == "text":
        _emit(_render_interpretation(doc), args.out)
    else:
        _emit(canonical_json(doc), args.out)
    return 0


def cmd_evaluate(args) -> int:
    loaded = load_dataset(args.dataset.read_bytes())
    for report in loaded.excluded:
        print(f"excluded entry {report.entry_id}: {report.reason}", file=sys.stderr)

    bundles: dict[str, MetadataBundle] = {}
    for path in sorted(args.bundle_dir.glob("*.json")):
        bundle = _read_bundle(path)
        bundles[bundle.video_id] = bundle
    if not bundles:
        print(f"no bundles found under {args.bundle_dir}", file=sys.stderr)
        return 1

    if args.replay is not None:
        provider: Provider = ReplayProvider(args.replay)
    else:
        provider = _oracle_for(list(bundles.values()))

    report = run_evaluation(loaded.entries, bundles, provider)
    if args.report is not None:
        args.report.write_text(
            canonical_json(report_to_dict(report)) + "\n", encoding="utf-8"
        )
    print(render_report(report))
    return 0


def cmd_serve(args) -> int:
    config = load_config(args.config, env=os.environ)
    serve(config)
    return 0


def cmd_cache_record(args) -> int:
    bundle = _read_bundle(args.bundle)
    command_docs = _read_commands(args.commands)
    if args.live_config is not None:
        live_doc = json.loads(args.live_config.read_text("utf-8"))
        base: Provider = LiveProvider(LiveConfig(**live_doc))
    else:
        base = _oracle_for([bundle])
    provider = RecordingProvider(base, args.out)
    _interpret(bundle, command_docs, provider)
    print(f"recorded {len(provider.cache)} exchange(s) to {args.out}")
    return 0


def cmd_cache_inspect(args) -> int:
    counts: dict[str, int] = {}
    with open(args.path, encoding="utf-8") as fh:
        lines = [line for line in (l.strip() for l in fh) if line]
    if not lines:
        raise ValidationError(f"{args.path}: empty file")
    header = json.loads(lines[0])
    if "format" not in header or "version" not in header:
        raise ValidationError(f"{args.path}: missing cache header")
    seen: dict[str, dict] = {}
    for line in lines[1:]:
        doc = json.loads(line)
        seen[doc["key"]] = doc
    for doc in seen.values():
        template = doc.get("template", "?")
        counts[template] = counts.get(template, 0) + 1
    print(f"{header['format']} v{header['version']}: {len(seen)} exchange(s)")
    for template in sorted(counts):
        print(f"  {template}: {counts[template]}")
    return 0


_HANDLERS = {
    "validate-bundle": cmd_validate_bundle,
    "interpret": cmd_interpret,
    "evaluate": cmd_evaluate,
    "serve": cmd_serve,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.subcommand == "cache":
        handler = (
            cmd_cache_record if args.cache_command == "record" else cmd_cache_inspect
        )
    else:
        handler = _HANDLERS[args.subcommand]

    try:
        return handler(args)
    except (
        BundleError,
        ValidationError,
        ConfigError,
        ProviderError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
