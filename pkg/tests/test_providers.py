import json
import math

import httpx
import pytest

from sketchedit.bundle import CropPlant, SynthSpec, synthesize_bundle
from sketchedit.core import FULL_FRAME, Embedding, Rect, ValidationError
from sketchedit.embeddings import HashEmbedder, cosine
from sketchedit.prompts import OutputParseError, TemplateId, build_messages, parse_response
from sketchedit.providers import (
    ChatRequest,
    FrameRef,
    LiveConfig,
    LiveProvider,
    MalformedResponse,
    OracleProvider,
    RecordingProvider,
    ReplayMiss,
    ReplayProvider,
    request_key,
)


class TestEmbeddings:
    def test_unit_norm(self):
        emb = HashEmbedder(dim=64).embed("whenever there is a mention of advice")
        assert abs(emb.norm() - 1.0) <= 1e-6

    def test_deterministic(self):
        e = HashEmbedder(dim=32, seed=4)
        assert e.embed("kettle") == e.embed("kettle")

    def test_distinct_strings_not_parallel(self):
        e = HashEmbedder(dim=64)
        assert cosine(e.embed("kettle"), e.embed("whisk")) < 1.0

    def test_cosine_identity(self):
        a = Embedding((0.6, 0.8))
        assert cosine(a, a) == 1.0

    def test_cosine_orthogonal(self):
        assert cosine(Embedding((1.0, 0.0)), Embedding((0.0, 1.0))) == 0.0

    def test_cosine_45_degrees(self):
        b = Embedding((1 / math.sqrt(2), 1 / math.sqrt(2)))
        assert cosine(Embedding((1.0, 0.0)), b) == pytest.approx(0.7071, abs=1e-4)

    def test_cosine_dim_mismatch(self):
        with pytest.raises(ValidationError):
            cosine(Embedding((1.0,)), Embedding((1.0, 0.0)))


class TestPrompts:
    def test_messages_have_system_and_user(self):
        msgs = build_messages(
            TemplateId.STAGE1_PARSE,
            {"command_text": "cut at 18:08", "sketch_attached": False},
        )
        assert [m["role"] for m in msgs] == ["system", "user"]
        assert "cut at 18:08" in msgs[1]["content"]

    def test_missing_payload_key(self):
        with pytest.raises(OutputParseError, match="missing keys"):
            build_messages(TemplateId.STAGE1_PARSE, {"command_text": "x"})

    def test_parse_valid_stage1(self):
        doc = {
            "operations": ["cut"],
            "temporal_references": [{"text": "18:08", "category": "position"}],
            "spatial_references": [],
            "parameter_references": [],
        }
        out = parse_response(TemplateId.STAGE1_PARSE, json.dumps(doc))
        assert out["operations"] == ["cut"]

    def test_parse_tolerates_code_fence(self):
        raw = "```json\n{\"matches\": []}\n```"
        assert parse_response(TemplateId.STAGE2_TRANSCRIPT, raw) == {"matches": []}

    def test_parse_rejects_unknown_operation(self):
        doc = {"operations": ["sparkle"]}
        with pytest.raises(OutputParseError):
            parse_response(TemplateId.STAGE1_PARSE, json.dumps(doc))

    def test_parse_rejects_prose(self):
        with pytest.raises(OutputParseError, match="not valid JSON"):
            parse_response(TemplateId.STAGE2_TRANSCRIPT, "Sure! Here you go")

    def test_parse_rejects_extra_keys(self):
        doc = {"matches": [], "note": "hi"}
        with pytest.raises(OutputParseError):
            parse_response(TemplateId.STAGE2_TRANSCRIPT, json.dumps(doc))

    def test_change_kind_cross_checks(self):
        bad = {"changes": [{"field": "font_size", "kind": "explicit"}]}
        with pytest.raises(OutputParseError):
            parse_response(TemplateId.STAGE4_PARAMS, json.dumps(bad))
        bad = {"changes": [{"field": "duration_s", "kind": "relative"}]}
        with pytest.raises(OutputParseError):
            parse_response(TemplateId.STAGE4_PARAMS, json.dumps(bad))


def _transcript_req():
    return ChatRequest(
        template=TemplateId.STAGE2_TRANSCRIPT,
        payload={
            "reference_text": "mention of advice",
            "snippets": [
                {"index": 0, "start_s": 0.0, "end_s": 10.0, "text": "hello there"},
                {
                    "index": 1,
                    "start_s": 120.0,
                    "end_s": 130.0,
                    "text": "my advice is to rest the dough",
                },
            ],
        },
    )


class TestOracleProvider:
    def test_scripted_fixture_wins(self):
        p = OracleProvider()
        p.script(TemplateId.STAGE2_TRANSCRIPT, {"matches": [{"index": 1, "explanation": "scripted"}]})
        resp = p.complete(_transcript_req())
        assert resp.payload == {"matches": [{"index": 1, "explanation": "scripted"}]}

    def test_heuristic_word_overlap(self):
        resp = OracleProvider().complete(_transcript_req())
        assert [m["index"] for m in resp.payload["matches"]] == [1]

    def test_scripted_must_be_schema_valid(self):
        p = OracleProvider()
        with pytest.raises(OutputParseError):
            p.script(TemplateId.STAGE2_TRANSCRIPT, {"matches": [{"index": -1}]})

    def test_heuristic_stage1_timecode(self):
        p = OracleProvider()
        resp = p.complete(
            ChatRequest(
                TemplateId.STAGE1_PARSE,
                {"command_text": "cut at 18:08", "sketch_attached": False},
            )
        )
        assert resp.payload["operations"] == ["cut"]
        assert resp.payload["temporal_references"] == [
            {"text": "18:08", "category": "position"}
        ]

    def test_embed_region_returns_nearest_crop(self):
        rect = Rect(0.25, 0.25, 0.5, 0.25)
        bundle = synthesize_bundle(
            SynthSpec(
                duration_s=20.0,
                crop_plants=(CropPlant(7.0, rect, "red kettle"),),
            ),
            seed=3,
        )
        p = OracleProvider(bundles={bundle.video_id: bundle})
        got = p.embed_region(FrameRef(bundle.video_id, 7.0), rect)
        assert got == p.embed_text("red kettle")

    def test_embed_region_full_frame_ok(self):
        p = OracleProvider()
        emb = p.embed_region(FrameRef("none", 0.0), FULL_FRAME)
        assert abs(emb.norm() - 1.0) <= 1e-6

    def test_embed_region_deterministic(self):
        p = OracleProvider()
        ref = FrameRef("vid", 3.0)
        r = Rect(0.1, 0.1, 0.3, 0.3)
        assert p.embed_region(ref, r) == p.embed_region(ref, r)


class TestReplay:
    def test_record_then_replay_verbatim(self, tmp_path):
        cache_path = tmp_path / "cache.jsonl"
        oracle = OracleProvider()
        rec = RecordingProvider(oracle, cache_path)
        req = _transcript_req()
        first = rec.complete(req)
        emb = rec.embed_text("advice")

        replay = ReplayProvider(cache_path)
        again = replay.complete(req)
        assert again == first
        assert replay.embed_text("advice") == emb

    def test_replay_miss(self, tmp_path):
        cache_path = tmp_path / "cache.jsonl"
        RecordingProvider(OracleProvider(), cache_path).embed_text("seed entry")
        replay = ReplayProvider(cache_path)
        with pytest.raises(ReplayMiss):
            replay.complete(_transcript_req())
        with pytest.raises(ReplayMiss):
            replay.embed_text("never recorded")

    def test_cache_summary(self, tmp_path):
        cache_path = tmp_path / "cache.jsonl"
        rec = RecordingProvider(OracleProvider(), cache_path)
        rec.complete(_transcript_req())
        rec.embed_text("advice")
        summary = ReplayProvider(cache_path).cache.summary()
        assert summary["entries"] == 2
        assert summary["by_template"] == {"embed_text": 1, "stage2_transcript": 1}

    def test_key_is_payload_sensitive(self):
        a = request_key("stage2_transcript", {"reference_text": "a", "snippets": []})
        b = request_key("stage2_transcript", {"reference_text": "b", "snippets": []})
        assert a != b


def _fake_chat_client(replies):
    """httpx client whose chat endpoint pops canned completions."""
    queue = list(replies)
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        content = queue.pop(0) if queue else queue_last(replies)
        return httpx.Response(
            200, json={"choices": [{"message": {"content": content}}]}
        )

    def queue_last(r):
        return r[-1]

    return httpx.Client(transport=httpx.MockTransport(handler)), calls


_LIVE_CFG = LiveConfig(
    chat_url="http://chat.test/v1/chat/completions",
    chat_model="m",
    embed_url="http://embed.test/v1/embeddings",
    embed_model="e",
)


class TestLiveRepairLoop:
    def test_repair_after_garbage(self):
        good = json.dumps({"matches": []})
        client, calls = _fake_chat_client(["not json at all", good])
        provider = LiveProvider(_LIVE_CFG, client=client)
        resp = provider.complete(_transcript_req())
        assert resp.payload == {"matches": []}
        assert calls["n"] == 2

    def test_malformed_after_two_repairs(self):
        client, calls = _fake_chat_client(["junk one", "junk two", "junk three"])
        provider = LiveProvider(_LIVE_CFG, client=client)
        with pytest.raises(MalformedResponse) as exc:
            provider.complete(_transcript_req())
        assert calls["n"] == 3
        assert exc.value.raw_text == "junk three"

    def test_embed_text_normalized(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(
                200, json={"data": [{"embedding": [3.0, 4.0]}]}
            )

        client = httpx.Client(transport=httpx.MockTransport(handler))
        provider = LiveProvider(_LIVE_CFG, client=client)
        emb = provider.embed_text("anything")
        assert emb.values == (0.6, 0.8)
