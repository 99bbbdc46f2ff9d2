from sketchedit.core import EditOperation
from sketchedit.lexical import (
    classify_operations,
    find_abstract_position,
    find_time_tokens,
    parse_timecode,
)


class TestParseTimecode:
    def test_minutes_seconds(self):
        assert parse_timecode("54:43") == 3283.0
        assert parse_timecode("0:23") == 23.0

    def test_hours(self):
        assert parse_timecode("1:02:30") == 3750.0

    def test_rejects_bad_seconds(self):
        assert parse_timecode("12:75") is None
        assert parse_timecode("1:75:10") is None
        assert parse_timecode("notime") is None


class TestFindTimeTokens:
    def test_bare_timecode(self):
        toks = find_time_tokens("cut at 18:08 please")
        assert len(toks) == 1
        assert toks[0].surface == "18:08"
        assert toks[0].start_s == 1088.0
        assert not toks[0].is_range

    def test_dash_range(self):
        toks = find_time_tokens("remove 0:00-12:30")
        assert len(toks) == 1
        assert toks[0].is_range
        assert (toks[0].start_s, toks[0].end_s) == (0.0, 750.0)

    def test_from_to_range_includes_from(self):
        toks = find_time_tokens("blur from 43:30 to 44:20")
        assert len(toks) == 1
        assert toks[0].surface == "from 43:30 to 44:20"
        assert (toks[0].start_s, toks[0].end_s) == (2610.0, 2660.0)

    def test_until_range(self):
        toks = find_time_tokens("mute 1:00 until 1:30")
        assert toks[0].is_range
        assert (toks[0].start_s, toks[0].end_s) == (60.0, 90.0)

    def test_comma_list_yields_singles(self):
        toks = find_time_tokens("cut at 1:00, 2:00, 3:00")
        assert [t.start_s for t in toks] == [60.0, 120.0, 180.0]
        assert all(not t.is_range for t in toks)

    def test_inverted_range_ignored_as_range(self):
        toks = find_time_tokens("5:00 to 4:00")
        # Not a valid range; the two timecodes surface individually.
        assert [t.is_range for t in toks] == [False, False]

    def test_no_tokens(self):
        assert find_time_tokens("make it prettier") == []


class TestClassifyOperations:
    def test_keyword_hits(self):
        assert classify_operations("cut at 18:08") == [EditOperation.CUT]
        assert classify_operations("zoom in at 0:23") == [EditOperation.ZOOM]
        assert classify_operations("blur the plate") == [EditOperation.BLUR]
        assert classify_operations("crop to the stove") == [EditOperation.CROP]

    def test_highlight_is_shape(self):
        assert classify_operations("highlight the speaker's face") == [
            EditOperation.SHAPE
        ]

    def test_default_is_text(self):
        assert classify_operations("make it prettier") == [EditOperation.TEXT]

    def test_multiple_ordered_by_first_mention(self):
        ops = classify_operations("add a caption then zoom into it")
        assert ops == [EditOperation.TEXT, EditOperation.ZOOM]


class TestAbstractPosition:
    def test_intro_words(self):
        assert find_abstract_position("in the intro") == "intro"
        assert find_abstract_position("at the beginning") == "intro"

    def test_ending_words(self):
        assert find_abstract_position("during the ending") == "ending"
        assert find_abstract_position("at the end") == "ending"

    def test_none(self):
        assert find_abstract_position("at the kettle") is None
