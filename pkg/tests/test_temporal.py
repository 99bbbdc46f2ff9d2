import dataclasses

import pytest

from sketchedit.bundle import ClipMetadata, SynthSpec, TranscriptSegment, synthesize_bundle
from sketchedit.core import TemporalRefCategory, TimeInterval
from sketchedit.embeddings import hash_embedding
from sketchedit.parsing import RefSpan, TemporalRef
from sketchedit.providers import OracleProvider
from sketchedit.temporal import (
    CandidateSegment,
    filter_top_k,
    ground_position_ref,
    ground_transcript_ref,
    ground_video_ref,
    merge_candidates,
    parse_position_ref,
    playhead_candidate,
)


def tref(text, category=TemporalRefCategory.TRANSCRIPT):
    return TemporalRef(RefSpan(0, len(text), text), category)


class TestParsePositionRef:
    def test_bare_timecode_centered(self):
        got = parse_position_ref("54:43", 4000.0)
        assert got.intervals == [TimeInterval(3278.0, 3288.0)]
        assert got.diagnostics == []

    def test_explicit_range_verbatim(self):
        got = parse_position_ref("0:00-12:30", 4000.0)
        assert got.intervals == [TimeInterval(0.0, 750.0)]

    def test_from_to_range(self):
        got = parse_position_ref("from 43:30 to 44:20", 4000.0)
        assert got.intervals == [TimeInterval(2610.0, 2660.0)]

    def test_clamped_at_start(self):
        got = parse_position_ref("0:03", 100.0)
        assert got.intervals == [TimeInterval(0.0, 10.0)]

    def test_clamped_at_end(self):
        got = parse_position_ref("1:39", 100.0)
        assert got.intervals == [TimeInterval(90.0, 100.0)]

    def test_short_video_whole(self):
        got = parse_position_ref("0:03", 6.0)
        assert got.intervals == [TimeInterval(0.0, 6.0)]

    def test_timecode_past_end_diagnosed(self):
        got = parse_position_ref("54:43", 100.0)
        assert got.intervals == []
        assert len(got.diagnostics) == 1

    def test_abstract_intro(self):
        got = parse_position_ref("the intro", 4000.0)
        assert got.intervals == [TimeInterval(0.0, 60.0)]

    def test_abstract_ending(self):
        got = parse_position_ref("the ending", 4000.0)
        assert got.intervals == [TimeInterval(3940.0, 4000.0)]

    def test_abstract_short_video(self):
        got = parse_position_ref("the intro", 30.0)
        assert got.intervals == [TimeInterval(0.0, 30.0)]

    def test_unparseable_diagnostic(self):
        got = parse_position_ref("sometime nice", 100.0)
        assert got.intervals == []
        assert len(got.diagnostics) == 1

    def test_comma_list_one_interval_each(self):
        got = parse_position_ref("1:00, 2:00, 3:00", 4000.0)
        assert got.intervals == [
            TimeInterval(55.0, 65.0),
            TimeInterval(115.0, 125.0),
            TimeInterval(175.0, 185.0),
        ]

    def test_brute_force_centering(self):
        duration = 4000.0
        for m in range(0, 66, 5):
            for s in (0, 7, 59):
                t = m * 60 + s
                got = parse_position_ref(f"{m}:{s:02d}", duration)
                start = min(max(t - 5.0, 0.0), duration - 10.0)
                assert got.intervals == [TimeInterval(start, start + 10.0)]


class TestFilterTopK:
    def test_fewer_than_k_all_kept(self):
        q = hash_embedding("advice")
        items = [(i, hash_embedding(w)) for i, w in enumerate("abcd")]
        got = filter_top_k(q, items, k=10)
        assert sorted(got) == [0, 1, 2, 3]

    def test_identical_ranks_first(self):
        q = hash_embedding("advice")
        items = [(0, hash_embedding("noise")), (1, q), (2, hash_embedding("other"))]
        assert filter_top_k(q, items)[0] == 1

    def test_equal_cosine_earlier_first(self):
        q = hash_embedding("advice")
        same = hash_embedding("tied")
        got = filter_top_k(q, [("later", same), ("early", same)], k=1)
        assert got == ["later"]  # input order is temporal order

    def test_k_limits(self):
        q = hash_embedding("x")
        items = [(i, hash_embedding(f"w{i}")) for i in range(20)]
        assert len(filter_top_k(q, items, k=10)) == 10


def _bundle_with_transcript(texts_at):
    """Bundle (duration 200) whose transcript is exactly the given segments."""
    b = synthesize_bundle(SynthSpec(duration_s=200.0), seed=1)
    transcript = tuple(
        TranscriptSegment(TimeInterval(a, c), text) for a, c, text in texts_at
    )
    return dataclasses.replace(b, transcript=transcript)


class TestGroundTranscript:
    def test_single_match_with_explanation(self):
        b = _bundle_with_transcript(
            [
                (0.0, 10.0, "hello and welcome back"),
                (120.0, 130.0, "my advice is to rest the dough"),
                (150.0, 160.0, "thanks for watching"),
            ]
        )
        got = ground_transcript_ref(tref("mention of advice"), b, OracleProvider())
        assert [c.interval for c in got] == [TimeInterval(120.0, 130.0)]
        assert got[0].explanation
        assert got[0].source_category == TemporalRefCategory.TRANSCRIPT

    def test_no_match_empty(self):
        b = _bundle_with_transcript([(0.0, 10.0, "hello and welcome back")])
        got = ground_transcript_ref(tref("mention of advice"), b, OracleProvider())
        assert got == []

    def test_three_matches_within_filtered_set(self):
        rows = [(i * 20.0, i * 20.0 + 10.0, f"filler number {i}") for i in range(9)]
        for j in (1, 4, 7):
            rows[j] = (rows[j][0], rows[j][1], f"more advice about resting {j}")
        b = _bundle_with_transcript(rows)
        got = ground_transcript_ref(tref("mention of advice"), b, OracleProvider())
        starts = [c.interval.start_s for c in got]
        assert starts == [20.0, 80.0, 140.0]
        snippet_intervals = {s.interval for s in b.transcript}
        assert all(c.interval in snippet_intervals for c in got)


def _bundle_with_clips(clip_labels, duration=60.0):
    b = synthesize_bundle(SynthSpec(duration_s=duration), seed=1)
    clips = tuple(
        ClipMetadata(
            interval=TimeInterval(i * 10.0, i * 10.0 + 10.0),
            action_label=label,
            abstract_caption="a quiet scene",
            dense_captions=tuple("a quiet scene" for _ in range(10)),
            summary="nothing notable",
        )
        for i, label in enumerate(clip_labels)
    )
    return dataclasses.replace(b, clips=clips)


class TestGroundVideo:
    def test_clips_2_and_5(self):
        labels = ["walking", "talking", "holding the pan", "resting",
                  "plating", "washing the pan"]
        b = _bundle_with_clips(labels)
        got = ground_video_ref(
            tref("whenever the pan is on screen", TemporalRefCategory.VIDEO),
            b,
            OracleProvider(),
        )
        assert [c.interval.start_s for c in got] == [20.0, 50.0]
        assert all(c.source_category == TemporalRefCategory.VIDEO for c in got)

    def test_no_matching_description(self):
        b = _bundle_with_clips(["walking", "talking", "resting",
                                "plating", "mixing", "kneading"])
        got = ground_video_ref(
            tref("whenever the pan is on screen", TemporalRefCategory.VIDEO),
            b,
            OracleProvider(),
        )
        assert got == []


def cand(a, b, ref_text="r", category=TemporalRefCategory.POSITION):
    return CandidateSegment(
        interval=TimeInterval(a, b),
        source_category=category,
        explanation=f"seg [{a},{b})",
        source_ref=RefSpan(0, len(ref_text), ref_text),
    )


class TestMergeCandidates:
    def test_same_ref_overlap_merges(self):
        got = merge_candidates([[cand(10, 20), cand(15, 25)]])
        assert [c.interval for c in got] == [TimeInterval(10, 25)]
        assert "seg [10,20)" in got[0].explanation
        assert "seg [15,25)" in got[0].explanation

    def test_same_ref_adjacent_merges(self):
        got = merge_candidates([[cand(10, 20), cand(20, 30)]])
        assert [c.interval for c in got] == [TimeInterval(10, 30)]

    def test_cross_ref_overlap_kept_flagged(self):
        got = merge_candidates([[cand(10, 20)], [cand(15, 25)]])
        assert [c.interval for c in got] == [
            TimeInterval(10, 20),
            TimeInterval(15, 25),
        ]
        assert all(c.duplicated for c in got)

    def test_cross_ref_disjoint_not_flagged(self):
        got = merge_candidates([[cand(10, 20)], [cand(30, 40)]])
        assert not any(c.duplicated for c in got)

    def test_empty(self):
        assert merge_candidates([]) == []
        assert merge_candidates([[], []]) == []

    def test_sorted_by_start(self):
        got = merge_candidates([[cand(50, 60)], [cand(10, 20)]])
        assert [c.interval.start_s for c in got] == [10, 50]

    def test_within_ref_output_non_overlapping(self):
        got = merge_candidates([[cand(0, 10), cand(5, 12), cand(40, 50)]])
        for a, b in zip(got, got[1:]):
            assert a.interval.end_s <= b.interval.start_s


class TestPlayheadCandidate:
    def test_centered_at_playhead(self):
        c = playhead_candidate(100.0, 4000.0)
        assert c.interval == TimeInterval(95.0, 105.0)
        assert c.source_ref is None

    def test_clamped(self):
        assert playhead_candidate(1.0, 4000.0).interval == TimeInterval(0.0, 10.0)
        assert playhead_candidate(3999.0, 4000.0).interval == TimeInterval(
            3990.0, 4000.0
        )

    def test_short_video(self):
        assert playhead_candidate(2.0, 6.0).interval == TimeInterval(0.0, 6.0)
