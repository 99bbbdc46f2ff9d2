"""Engine tests: pipeline orchestration, lifecycle, history, and export."""

import random

import pytest

from sketchedit.bundle import SynthSpec, synthesize_bundle
from sketchedit.core import (
    BlurParams,
    CutParams,
    EditOperation,
    Rect,
    TextParams,
    TimeInterval,
    ZoomParams,
    interval_intersects,
)
from sketchedit.embeddings import HashEmbedder
from sketchedit.engine import (
    EditPatch,
    EditStatus,
    HistoryExhausted,
    IllegalTransition,
    OutOfBounds,
    OverlapViolation,
    SchemaMismatch,
    UnknownId,
    ValidationError,
    accept,
    adjust_edit,
    export_edl,
    import_edl,
    iterate_command,
    new_project,
    redo,
    reject,
    search_more,
    snapshot,
    submit_command,
    undo,
)
from sketchedit.parsing import EditCommand
from sketchedit.prompts import TemplateId
from sketchedit.providers import OracleProvider, ProviderError
from sketchedit.serde import canonical_json
from sketchedit.temporal import filter_top_k


def oracle_for(bundle):
    provider = OracleProvider()
    provider.add_bundle(bundle)
    return provider


def make_bundle(duration_s=60.0, transcript_texts=(), video_id="vid"):
    return synthesize_bundle(
        SynthSpec(
            video_id=video_id,
            duration_s=duration_s,
            transcript_texts=tuple(transcript_texts),
        ),
        seed=7,
    )


def cmd(text, **kw):
    kw.setdefault("playhead_t", 0.0)
    kw.setdefault("layer_id", "L1")
    return EditCommand(text=text, **kw)


def all_edits(project):
    return [e for layer in project.layers for e in layer.edits]


def check_layer_invariant(project):
    for layer in project.layers:
        live = [e for e in layer.edits if e.status != EditStatus.REJECTED]
        assert len({e.operation for e in live}) <= 1, f"mixed ops in {layer.id}"
        if live:
            assert layer.operation == live[0].operation
        accepted = [e for e in live if e.status == EditStatus.ACCEPTED]
        for i, a in enumerate(accepted):
            for b in accepted[i + 1:]:
                assert not interval_intersects(a.interval, b.interval), (
                    f"accepted overlap in {layer.id}: {a.id} vs {b.id}"
                )


# ---------------------------------------------------------------- projects


class TestProjectSetup:
    def test_new_project_shape(self):
        p = new_project(make_bundle())
        assert [layer.id for layer in p.layers] == ["L1"]
        assert p.layers[0].operation is None
        assert p.commands == []
        assert len(p.history) == 1
        assert p.revision == 0
        assert p.history[-1] == snapshot(p)


# ------------------------------------------------------------------ submit


class TestSubmit:
    def test_explicit_range_single_suggestion(self):
        p = new_project(make_bundle())
        record = submit_command(p, cmd("blur from 0:10 to 0:20"), oracle_for(p.bundle))
        assert len(record.suggestion_ids) == 1
        (edit,) = all_edits(p)
        assert edit.operation == EditOperation.BLUR
        assert edit.interval == TimeInterval(10.0, 20.0)
        assert edit.status == EditStatus.SUGGESTED
        assert edit.params == BlurParams(degree=0.5)
        assert edit.provenance.command_id == record.id
        assert edit.provenance.spatial_method == "full_frame"
        assert "stated position" in edit.provenance.temporal_explanation
        assert p.layers[0].operation == EditOperation.BLUR
        assert p.playhead_t == 10.0
        assert p.revision == 1

    def test_long_range_clamped_to_video(self):
        p = new_project(make_bundle(duration_s=800.0))
        record = submit_command(p, cmd("blur 0:00-12:30"), oracle_for(p.bundle))
        assert len(record.suggestion_ids) == 1
        assert all_edits(p)[0].interval == TimeInterval(0.0, 750.0)

    def test_transcript_mentions_multiply(self):
        texts = ["nothing here"] * 6
        texts[1] = "my advice is to rest the dough"
        texts[4] = "one more bit of advice for you"
        p = new_project(make_bundle(transcript_texts=texts))
        provider = oracle_for(p.bundle)
        provider.script(
            TemplateId.STAGE1_PARSE,
            {
                "operations": ["text"],
                "temporal_references": [
                    {"text": "whenever she mentions advice", "category": "transcript"}
                ],
                "spatial_references": [],
                "parameter_references": [],
            },
        )
        record = submit_command(
            p, cmd("whenever she mentions advice, add a caption"), provider
        )
        assert len(record.suggestion_ids) == 2
        edits = all_edits(p)
        assert [e.interval for e in edits] == [
            TimeInterval(10.0, 20.0),
            TimeInterval(40.0, 50.0),
        ]
        assert edits[0].params.content == "my advice is to rest the dough"
        assert edits[1].params.content == "one more bit of advice for you"

    def test_no_match_keeps_record_with_diagnostics(self):
        p = new_project(make_bundle(transcript_texts=["nothing here"] * 6))
        provider = oracle_for(p.bundle)
        provider.script(
            TemplateId.STAGE1_PARSE,
            {
                "operations": ["blur"],
                "temporal_references": [
                    {
                        "text": "when she discusses chromodynamics",
                        "category": "transcript",
                    }
                ],
                "spatial_references": [],
                "parameter_references": [],
            },
        )
        record = submit_command(
            p, cmd("blur it when she discusses chromodynamics"), provider
        )
        assert record.suggestion_ids == []
        assert record.diagnostics
        assert "no suggestions" in record.summary
        assert all_edits(p) == []
        assert p.revision == 1

    def test_no_timing_uses_playhead(self):
        p = new_project(make_bundle())
        record = submit_command(
            p, cmd("blur the background", playhead_t=30.0), oracle_for(p.bundle)
        )
        assert len(record.suggestion_ids) == 1
        assert all_edits(p)[0].interval == TimeInterval(25.0, 35.0)

    def test_extra_operations_spawn_sibling_layers(self):
        p = new_project(make_bundle())
        record = submit_command(p, cmd("add text and zoom at 0:30"), oracle_for(p.bundle))
        assert len(record.suggestion_ids) == 2
        assert [layer.id for layer in p.layers] == ["L1", "L2"]
        assert p.layers[0].operation == EditOperation.TEXT
        assert p.layers[1].operation == EditOperation.ZOOM
        zoom_edit = p.layers[1].edits[0]
        assert isinstance(zoom_edit.params, ZoomParams)
        assert zoom_edit.params.animation_duration_s == 10.0

    def test_head_op_conflicting_with_target_layer_spawns_sibling(self):
        p = new_project(make_bundle())
        submit_command(p, cmd("blur from 0:10 to 0:20"), oracle_for(p.bundle))
        submit_command(p, cmd("add text at 0:40"), oracle_for(p.bundle))
        assert [layer.operation for layer in p.layers] == [
            EditOperation.BLUR,
            EditOperation.TEXT,
        ]

    def test_stage2_outage_yields_zero_suggestions(self):
        class FlakyStage2(OracleProvider):
            def complete(self, req):
                if req.template == TemplateId.STAGE2_TRANSCRIPT:
                    raise ProviderError("transcript grounding offline")
                return super().complete(req)

        p = new_project(make_bundle(transcript_texts=["the advice segment"] * 6))
        provider = FlakyStage2()
        provider.add_bundle(p.bundle)
        provider.script(
            TemplateId.STAGE1_PARSE,
            {
                "operations": ["blur"],
                "temporal_references": [
                    {"text": "when she gives advice", "category": "transcript"}
                ],
                "spatial_references": [],
                "parameter_references": [],
            },
        )
        record = submit_command(p, cmd("blur it when she gives advice"), provider)
        assert record.suggestion_ids == []
        assert any("could not ground" in d for d in record.diagnostics)

    def test_unknown_layer(self):
        p = new_project(make_bundle())
        with pytest.raises(UnknownId):
            submit_command(p, cmd("blur at 0:10", layer_id="L99"), oracle_for(p.bundle))

    def test_sketch_governs_rect(self):
        p = new_project(make_bundle())
        sketch = Rect(0.1, 0.6, 0.5, 0.3)
        record = submit_command(
            p,
            cmd("blur this from 0:10 to 0:20", sketch=sketch, sketch_frame_t=15.0),
            oracle_for(p.bundle),
        )
        edit = all_edits(p)[0]
        assert edit.rect == sketch
        assert edit.provenance.spatial_method == "sketch"
        assert record.suggestion_ids == [edit.id]


# ------------------------------------------------------- accept and reject


class TestLifecycle:
    def setup_overlap(self):
        p = new_project(make_bundle())
        provider = oracle_for(p.bundle)
        r1 = submit_command(p, cmd("blur from 0:10 to 0:20"), provider)
        r2 = submit_command(p, cmd("blur from 0:15 to 0:25"), provider)
        return p, r1.suggestion_ids[0], r2.suggestion_ids[0]

    def test_accept_marks_accepted(self):
        p, e1, _ = self.setup_overlap()
        updated = accept(p, e1)
        assert updated.status == EditStatus.ACCEPTED
        check_layer_invariant(p)

    def test_accept_overlapping_raises_and_preserves_state(self):
        p, e1, e2 = self.setup_overlap()
        accept(p, e1)
        before = snapshot(p)
        rev = p.revision
        with pytest.raises(OverlapViolation):
            accept(p, e2)
        assert snapshot(p) == before
        assert p.revision == rev

    def test_overlapping_suggestions_allowed_until_acceptance(self):
        p, e1, e2 = self.setup_overlap()
        check_layer_invariant(p)  # both suggested, overlap tolerated
        accept(p, e1)
        reject(p, e2)
        check_layer_invariant(p)

    def test_reject_always_succeeds(self):
        p, e1, e2 = self.setup_overlap()
        accept(p, e1)
        rejected = reject(p, e2)
        assert rejected.status == EditStatus.REJECTED

    def test_accept_then_reject_is_illegal(self):
        p, e1, _ = self.setup_overlap()
        accept(p, e1)
        with pytest.raises(IllegalTransition):
            accept(p, e1)
        with pytest.raises(IllegalTransition):
            reject(p, e1)

    def test_unknown_edit_id(self):
        p, _, _ = self.setup_overlap()
        with pytest.raises(UnknownId):
            accept(p, "e999")

    def test_accept_leaves_other_edits_untouched(self):
        p = new_project(make_bundle())
        record = submit_command(p, cmd("zoom 0:30, 0:50"), oracle_for(p.bundle))
        first, second = record.suggestion_ids
        other_before = next(e for e in all_edits(p) if e.id == second)
        accept(p, first)
        other_after = next(e for e in all_edits(p) if e.id == second)
        assert other_before == other_after

    def test_fully_rejected_layer_unpins(self):
        p = new_project(make_bundle())
        record = submit_command(p, cmd("blur at 0:10"), oracle_for(p.bundle))
        reject(p, record.suggestion_ids[0])
        assert p.layers[0].operation is None


# ------------------------------------------------------------------ adjust


class TestAdjust:
    def make_single(self, text="blur from 2:00 to 2:10"):
        p = new_project(make_bundle(duration_s=300.0))
        record = submit_command(p, cmd(text), oracle_for(p.bundle))
        return p, record.suggestion_ids[0]

    def test_drag_interval(self):
        p, eid = self.make_single()
        updated = adjust_edit(p, eid, EditPatch(interval=TimeInterval(118.0, 133.0)))
        assert updated.interval == TimeInterval(118.0, 133.0)

    def test_patch_rect(self):
        p, eid = self.make_single()
        updated = adjust_edit(p, eid, EditPatch(rect=Rect(0.2, 0.2, 0.5, 0.5)))
        assert updated.rect == Rect(0.2, 0.2, 0.5, 0.5)

    def test_patch_onto_accepted_neighbor_fails(self):
        p = new_project(make_bundle())
        provider = oracle_for(p.bundle)
        r1 = submit_command(p, cmd("blur from 0:10 to 0:20"), provider)
        r2 = submit_command(p, cmd("blur from 0:30 to 0:40"), provider)
        accept(p, r1.suggestion_ids[0])
        before = snapshot(p)
        with pytest.raises(OverlapViolation):
            adjust_edit(
                p, r2.suggestion_ids[0], EditPatch(interval=TimeInterval(15.0, 25.0))
            )
        assert snapshot(p) == before

    def test_interval_past_video_end(self):
        p, eid = self.make_single()
        with pytest.raises(OutOfBounds):
            adjust_edit(p, eid, EditPatch(interval=TimeInterval(290.0, 310.0)))

    def test_params_must_match_operation(self):
        p, eid = self.make_single()
        before = snapshot(p)
        with pytest.raises(SchemaMismatch):
            adjust_edit(p, eid, EditPatch(params=TextParams()))
        assert snapshot(p) == before

    def test_operation_change_needs_matching_params(self):
        p, eid = self.make_single()
        with pytest.raises(SchemaMismatch):
            adjust_edit(p, eid, EditPatch(operation=EditOperation.CUT))
        updated = adjust_edit(
            p, eid, EditPatch(operation=EditOperation.CUT, params=CutParams())
        )
        assert updated.operation == EditOperation.CUT
        assert p.layers[0].operation == EditOperation.CUT

    def test_operation_change_blocked_by_layer_mates(self):
        p = new_project(make_bundle())
        provider = oracle_for(p.bundle)
        r1 = submit_command(p, cmd("blur from 0:10 to 0:20"), provider)
        submit_command(p, cmd("blur from 0:30 to 0:40"), provider)
        with pytest.raises(SchemaMismatch):
            adjust_edit(
                p,
                r1.suggestion_ids[0],
                EditPatch(operation=EditOperation.CUT, params=CutParams()),
            )

    def test_empty_patch_rejected(self):
        p, eid = self.make_single()
        with pytest.raises(SchemaMismatch):
            adjust_edit(p, eid, EditPatch())

    def test_atomic_failure_changes_nothing(self):
        p, eid = self.make_single()
        before = snapshot(p)
        rev = p.revision
        with pytest.raises(SchemaMismatch):
            adjust_edit(
                p,
                eid,
                EditPatch(interval=TimeInterval(50.0, 60.0), params=TextParams()),
            )
        assert snapshot(p) == before and p.revision == rev


# ------------------------------------------------------------- search more


def plant_advice_bundle():
    # 20 segments, 200 s: the search window [125, 200) holds 8 snippets,
    # fewer than the top-k, so the late mention is always in the pool.
    texts = ["filler words only"] * 20
    texts[2] = "here is my advice about dough"
    texts[18] = "more advice arrives this late"
    return make_bundle(duration_s=200.0, transcript_texts=texts)


REF = "whenever she mentions advice"


def scripted_submit(p, provider, match_segment):
    """Submit the advice command with stage 2 scripted to one chosen segment."""
    provider.script(
        TemplateId.STAGE1_PARSE,
        {
            "operations": ["text"],
            "temporal_references": [{"text": REF, "category": "transcript"}],
            "spatial_references": [],
            "parameter_references": [],
        },
    )
    embedder = HashEmbedder(dim=64, seed=0)
    query = embedder.embed(REF)
    items = [
        (i, embedder.embed(seg.text)) for i, seg in enumerate(p.bundle.transcript)
    ]
    kept = sorted(filter_top_k(query, items, 10))
    assert match_segment in kept, "fixture segment fell outside the top-k pool"
    provider.script(
        TemplateId.STAGE2_TRANSCRIPT,
        {
            "matches": [
                {
                    "index": kept.index(match_segment),
                    "explanation": "mentions advice",
                }
            ]
        },
    )
    return submit_command(p, cmd(f"{REF}, add a caption"), provider)


class TestSearchMore:
    def test_finds_missed_mention_in_window(self):
        p = new_project(plant_advice_bundle())
        provider = oracle_for(p.bundle)
        record = scripted_submit(p, provider, match_segment=2)
        assert [e.interval for e in all_edits(p)] == [TimeInterval(20.0, 30.0)]

        new_edits = search_more(p, record.id, near_t=185.0, provider=provider)
        assert [e.interval for e in new_edits] == [TimeInterval(180.0, 190.0)]
        assert new_edits[0].id in record.suggestion_ids
        assert new_edits[0].operation == EditOperation.TEXT
        layer_ids = {layer.id for layer in p.layers for e in layer.edits}
        assert layer_ids == {"L1"}

    def test_window_already_covered_returns_nothing(self):
        p = new_project(plant_advice_bundle())
        provider = oracle_for(p.bundle)
        record = scripted_submit(p, provider, match_segment=2)
        rev = p.revision
        hist = len(p.history)
        got = search_more(p, record.id, near_t=25.0, provider=provider)
        assert got == []
        assert p.revision == rev and len(p.history) == hist

    def test_window_restricts_retrieval_pool(self):
        seen = []

        class Spy(OracleProvider):
            def complete(self, req):
                if req.template == TemplateId.STAGE2_TRANSCRIPT:
                    seen.append(req.payload)
                return super().complete(req)

        texts = ["filler words only"] * 3
        texts[2] = "my advice shows up late"
        p = new_project(make_bundle(duration_s=30.0, transcript_texts=texts))
        provider = Spy()
        provider.add_bundle(p.bundle)
        provider.script(
            TemplateId.STAGE1_PARSE,
            {
                "operations": ["blur"],
                "temporal_references": [{"text": REF, "category": "transcript"}],
                "spatial_references": [],
                "parameter_references": [],
            },
        )
        record = submit_command(p, cmd(f"{REF}, blur it"), provider)
        search_more(p, record.id, near_t=10.0, provider=provider)
        # near_t 10 on a 30 s video clamps the window to the whole video,
        # so every snippet stays in the search pool.
        assert len(seen) == 2
        starts = [s["start_s"] for s in seen[1]["snippets"]]
        assert starts == [0.0, 10.0, 20.0]

    def test_playhead_record_searches_near_t(self):
        p = new_project(make_bundle(duration_s=30.0))
        provider = oracle_for(p.bundle)
        record = submit_command(p, cmd("blur the shot"), provider)
        assert [e.interval for e in all_edits(p)] == [TimeInterval(0.0, 10.0)]
        got = search_more(p, record.id, near_t=20.0, provider=provider)
        assert [e.interval for e in got] == [TimeInterval(15.0, 25.0)]

    def test_unknown_command(self):
        p = new_project(make_bundle())
        with pytest.raises(UnknownId):
            search_more(p, "c99", near_t=0.0, provider=oracle_for(p.bundle))


# --------------------------------------------------------------- iteration


class TestIterate:
    def test_child_record_supersedes_open_suggestions(self):
        p = new_project(make_bundle())
        provider = oracle_for(p.bundle)
        parent = submit_command(p, cmd("zoom 0:30, 0:50"), provider)
        kept_id = parent.suggestion_ids[0]
        accept(p, kept_id)
        child = iterate_command(
            p, parent.id, cmd("zoom 0:10 with a slower ramp"), provider
        )
        assert child.parent_command_id == parent.id
        by_id = {e.id: e for e in all_edits(p)}
        assert by_id[kept_id].superseded is False  # accepted stays live
        assert by_id[parent.suggestion_ids[1]].superseded is True
        assert all(not by_id[eid].superseded for eid in child.suggestion_ids)

    def test_iterate_unknown_parent(self):
        p = new_project(make_bundle())
        with pytest.raises(UnknownId):
            iterate_command(p, "c9", cmd("zoom 0:10"), oracle_for(p.bundle))


# ----------------------------------------------------------------- history


class TestHistory:
    def test_undo_restores_bytes(self):
        p = new_project(make_bundle())
        before = snapshot(p)
        submit_command(p, cmd("blur at 0:10"), oracle_for(p.bundle))
        assert snapshot(p) != before
        undo(p)
        assert snapshot(p) == before

    def test_redo_restores_pre_undo(self):
        p = new_project(make_bundle())
        submit_command(p, cmd("blur at 0:10"), oracle_for(p.bundle))
        after = snapshot(p)
        undo(p)
        redo(p)
        assert snapshot(p) == after

    def test_revision_counts_undo_and_redo(self):
        p = new_project(make_bundle())
        submit_command(p, cmd("blur at 0:10"), oracle_for(p.bundle))
        assert p.revision == 1
        undo(p)
        assert p.revision == 2
        redo(p)
        assert p.revision == 3

    def test_undo_exhausted(self):
        p = new_project(make_bundle())
        with pytest.raises(HistoryExhausted):
            undo(p)

    def test_redo_without_undo(self):
        p = new_project(make_bundle())
        submit_command(p, cmd("blur at 0:10"), oracle_for(p.bundle))
        with pytest.raises(HistoryExhausted):
            redo(p)

    def test_new_mutation_clears_redo(self):
        p = new_project(make_bundle())
        provider = oracle_for(p.bundle)
        submit_command(p, cmd("blur at 0:10"), provider)
        undo(p)
        submit_command(p, cmd("cut at 0:30"), provider)
        with pytest.raises(HistoryExhausted):
            redo(p)

    def test_undo_restores_id_counters(self):
        p = new_project(make_bundle())
        provider = oracle_for(p.bundle)
        r1 = submit_command(p, cmd("blur at 0:10"), provider)
        undo(p)
        r2 = submit_command(p, cmd("blur at 0:10"), provider)
        assert r1.id == r2.id
        assert r1.suggestion_ids == r2.suggestion_ids


# ------------------------------------------------------------------ export


class TestExport:
    def test_empty_project(self):
        p = new_project(make_bundle())
        doc = export_edl(p)
        assert doc["edits"] == []
        assert doc["video_id"] == "vid"
        round_trip = import_edl(canonical_json(doc))
        assert canonical_json(round_trip) == canonical_json(doc)

    def accepted_project(self):
        p = new_project(make_bundle(duration_s=120.0))
        provider = oracle_for(p.bundle)
        for text in (
            "blur from 0:40 to 0:50",
            "blur from 0:10 to 0:20",
            "add text at 1:30",
        ):
            record = submit_command(p, cmd(text), provider)
            accept(p, record.suggestion_ids[0])
        return p

    def test_sorted_by_layer_then_start(self):
        p = self.accepted_project()
        doc = export_edl(p)
        keys = [(e["layer_id"], e["start_s"]) for e in doc["edits"]]
        assert keys == [("L1", 10.0), ("L1", 40.0), ("L2", 85.0)]
        assert doc["edits"][2]["operation"] == "text"
        assert doc["edits"][0]["params"] == {"operation": "blur", "degree": 0.5}
        assert doc["edits"][0]["rect_px"] == {"x": 0, "y": 0, "w": 1280, "h": 720}

    def test_round_trip_bytes(self):
        p = self.accepted_project()
        exported = canonical_json(export_edl(p))
        reimported = canonical_json(import_edl(exported.encode("utf-8")))
        assert reimported == exported

    def test_import_rejects_bad_format(self):
        with pytest.raises(ValidationError):
            import_edl({"format": "something-else", "version": 1})

    def test_import_rejects_bad_version(self):
        p = new_project(make_bundle())
        doc = export_edl(p)
        doc["version"] = 99
        with pytest.raises(ValidationError):
            import_edl(doc)

    def test_import_rejects_malformed_entry(self):
        p = self.accepted_project()
        doc = export_edl(p)
        del doc["edits"][0]["rect_px"]
        with pytest.raises(ValidationError):
            import_edl(doc)


# -------------------------------------------------------------------- fuzz


COMMANDS = (
    "blur from 0:10 to 0:20",
    "add text at 0:05",
    "cut at 0:45",
    "zoom 0:30, 0:50",
    "blur from 0:15 to 0:25",
)


def test_random_operation_sequences_hold_invariants():
    rng = random.Random(2024)
    p = new_project(make_bundle())
    provider = oracle_for(p.bundle)
    last_revision = p.revision
    for _ in range(300):
        roll = rng.random()
        try:
            if roll < 0.25:
                submit_command(p, cmd(rng.choice(COMMANDS)), provider)
            elif roll < 0.45:
                edits = all_edits(p)
                if edits:
                    accept(p, rng.choice(edits).id)
            elif roll < 0.60:
                edits = all_edits(p)
                if edits:
                    reject(p, rng.choice(edits).id)
            elif roll < 0.80:
                edits = all_edits(p)
                if edits:
                    e = rng.choice(edits)
                    lo = rng.uniform(0.0, 45.0)
                    patch = EditPatch(interval=TimeInterval(lo, lo + rng.uniform(1, 10)))
                    adjust_edit(p, e.id, patch)
            elif roll < 0.90:
                undo(p)
            else:
                redo(p)
        except (
            OverlapViolation,
            OutOfBounds,
            SchemaMismatch,
            IllegalTransition,
            HistoryExhausted,
            UnknownId,
        ):
            pass
        check_layer_invariant(p)
        assert p.history[-1] == snapshot(p)
        assert p.revision >= last_revision
        last_revision = p.revision
