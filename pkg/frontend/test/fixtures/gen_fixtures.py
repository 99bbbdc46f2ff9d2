"""Build the server-side fixtures the frontend tests run against.

Writes into --out:
  bundles/vid-fe.json   deterministic 120 s metadata bundle
  loop-cache.jsonl      provider traffic for the suggestion-loop script,
                        recorded by replaying loop_script.json against the
                        engine (accept/reject/adjust are provider-free but
                        the adjusted interval changes what search-more asks
                        for, so the whole sequence is mirrored exactly)
  oracle-config.json    serve config: oracle provider, the bundle dir
  replay-config.json    serve config: replay provider over loop-cache.jsonl

loop.test.ts drives the same script over HTTP against the replay server; any
drift between the two sequences shows up there as a replay miss.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from sketchedit.bundle import SynthSpec, bundle_to_dict, load_bundle, synthesize_bundle
from sketchedit.core import TimeInterval
from sketchedit.engine import (
    EditPatch,
    accept,
    adjust_edit,
    new_project,
    reject,
    search_more,
    submit_command,
)
from sketchedit.parsing import EditCommand
from sketchedit.providers import OracleProvider, RecordingProvider
from sketchedit.serde import canonical_json

HERE = Path(__file__).resolve().parent


def write_bundle(out: Path) -> Path:
    spec = SynthSpec(video_id="vid-fe", duration_s=120.0)
    bundle = synthesize_bundle(spec, seed=13)
    path = out / "bundles" / "vid-fe.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(bundle_to_dict(bundle)) + "\n", encoding="utf-8")
    return path


def record_loop_cache(out: Path, bundle_path: Path) -> Path:
    script = json.loads((HERE / "loop_script.json").read_text("utf-8"))
    # Record against the bundle as the server will load it, not the in-memory
    # original, so every provider payload hashes identically at replay time.
    bundle = load_bundle(bundle_path.read_bytes())

    cache_path = out / "loop-cache.jsonl"
    if cache_path.exists():
        cache_path.unlink()
    oracle = OracleProvider()
    oracle.add_bundle(bundle)
    provider = RecordingProvider(oracle, cache_path)

    project = new_project(bundle)
    submit = script["submit"]
    record = submit_command(
        project,
        EditCommand(
            text=submit["text"],
            playhead_t=float(submit["playhead_t"]),
            layer_id=submit["layer_id"],
        ),
        provider,
    )
    if len(record.suggestion_ids) < 2:
        sys.exit(
            f"loop script needs >= 2 suggestions, got {len(record.suggestion_ids)}"
        )

    for action in script["actions"]:
        kind = action["kind"]
        if kind in ("accept", "reject"):
            edit_id = record.suggestion_ids[action["suggestion"]]
            (accept if kind == "accept" else reject)(project, edit_id)
        elif kind == "adjust":
            edit_id = record.suggestion_ids[action["suggestion"]]
            patch = action["patch"]
            adjust_edit(
                project,
                edit_id,
                EditPatch(
                    interval=TimeInterval(
                        float(patch["start_s"]), float(patch["end_s"])
                    )
                ),
            )
        elif kind == "search_more":
            fresh = search_more(
                project, record.id, float(action["near_t"]), provider
            )
            if not fresh:
                sys.exit("loop script expected search_more to find a fresh segment")
        else:
            sys.exit(f"unknown loop action {kind!r}")
    return cache_path


def write_configs(
    out: Path, host: str, oracle_port: int, replay_port: int, cache_path: Path
) -> None:
    bundle_dir = str(out / "bundles")
    oracle = {
        "host": host,
        "port": oracle_port,
        "provider_mode": "oracle",
        "bundle_dir": bundle_dir,
    }
    replay = {
        "host": host,
        "port": replay_port,
        "provider_mode": "replay",
        "replay_cache": str(cache_path),
        "bundle_dir": bundle_dir,
    }
    (out / "oracle-config.json").write_text(
        json.dumps(oracle, indent=2) + "\n", encoding="utf-8"
    )
    (out / "replay-config.json").write_text(
        json.dumps(replay, indent=2) + "\n", encoding="utf-8"
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--oracle-port", type=int, required=True)
    parser.add_argument("--replay-port", type=int, required=True)
    args = parser.parse_args(argv)

    args.out.mkdir(parents=True, exist_ok=True)
    bundle_path = write_bundle(args.out)
    cache_path = record_loop_cache(args.out, bundle_path)
    write_configs(args.out, args.host, args.oracle_port, args.replay_port, cache_path)
    print(f"fixtures written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
