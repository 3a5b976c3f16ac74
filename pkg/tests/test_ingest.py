import io

import numpy as np
import pytest

from rtbust.exceptions import CausalityError, MalformedRecordError, MalformedSequenceError, WindowError
from rtbust.rtbust_ingest.models import AnalysisWindow, ParseReport, RetweetEvent, RleSequence, SparseSeries, UserSeries
from rtbust.rtbust_ingest.utils import (
    build_user_series,
    filter_users,
    parse_event_line,
    parse_events,
    read_series_file,
    rle_decode,
    rle_encode,
    rle_encode_sparse,
    write_series_file,
)


def _event(user_id: str, k: int, retweet_ts: int, source_ts: int) -> RetweetEvent:
    return RetweetEvent(user_id=user_id, retweet_id=f"{user_id}-{k}", retweet_ts=retweet_ts,
                        source_tweet_id=f"src-{k}", source_ts=source_ts)


def _dense_to_rle(dense: np.ndarray) -> list[int]:
    # Reference encoder working on the materialised series.
    values = []
    zeros = 0
    for v in dense.tolist():
        if v == 0:
            zeros += 1
            continue
        if zeros:
            values.append(-zeros)
            zeros = 0
        values.append(v)
    if zeros:
        values.append(-zeros)
    return values


def test_rle_encode_worked_example():
    sparse = SparseSeries(seconds=[0, 4, 6, 7], values=[3, 4, 6, 9], length=8)
    assert rle_encode_sparse(sparse).values == [3, -3, 4, -1, 6, 9]


def test_rle_encode_empty_user(small_window):
    series = UserSeries(user_id="u", events=[], window=small_window)
    assert rle_encode(series).values == [-small_window.duration_s]


def test_rle_encode_matches_dense_reference():
    rng = np.random.default_rng(11)
    t_ref = 1_000_000
    for trial in range(1_000):
        length = int(rng.integers(1, 200))
        window = AnalysisWindow(t_ref=t_ref, duration_s=length)
        dense = np.zeros(length, dtype=np.int64)
        k = int(rng.integers(0, length + 1))
        seconds = np.sort(rng.choice(length, size=k, replace=False))
        offsets = rng.integers(1, 10_000, size=k)
        dense[seconds] = offsets
        events = [_event(f"u{trial}", i, t_ref + int(s), t_ref - int(r)) for i, (s, r) in enumerate(zip(seconds, offsets))]

        rle = rle_encode(UserSeries(user_id=f"u{trial}", events=events, window=window))
        assert rle.values == _dense_to_rle(dense)
        assert rle.covered_seconds == length
        assert np.array_equal(rle_decode(rle, window).to_dense(), dense)


def test_rle_encode_sparse_matches_dense_reference():
    rng = np.random.default_rng(12)
    for _ in range(50):
        length = int(rng.integers(1, 200))
        dense = np.zeros(length, dtype=np.int64)
        k = int(rng.integers(0, length + 1))
        dense[rng.choice(length, size=k, replace=False)] = rng.integers(1, 10_000, size=k)
        seconds = np.flatnonzero(dense)
        sparse = SparseSeries(seconds=seconds.tolist(), values=dense[seconds].tolist(), length=length)
        assert rle_encode_sparse(sparse).values == _dense_to_rle(dense)


def test_rle_encode_series_uses_source_offset(small_window):
    t0 = small_window.t_ref
    events = [_event("u", 0, t0 + 2, t0 - 50), _event("u", 1, t0 + 5, t0 + 1)]
    rle = rle_encode(UserSeries(user_id="u", events=events, window=small_window))
    assert rle.values == [-2, 50, -2, 1, -(small_window.duration_s - 6)]
    assert rle.n_retweets == 2


def test_rle_encode_same_second_collision(small_window):
    t0 = small_window.t_ref
    events = [_event("u", 0, t0, t0 - 7), _event("u", 1, t0, t0 - 9)]
    rle = rle_encode(UserSeries(user_id="u", events=events, window=small_window))
    assert rle.values[:2] == [7, 9]
    assert rle.n_retweets == 2


def test_rle_decode_rejects_zero_and_double_negative():
    with pytest.raises(MalformedSequenceError):
        rle_decode(RleSequence(values=[3, 0, -2]))
    with pytest.raises(MalformedSequenceError):
        rle_decode(RleSequence(values=[-3, -2]))


def test_rle_decode_rejects_sequence_longer_than_window(small_window):
    with pytest.raises(MalformedSequenceError):
        rle_decode(RleSequence(values=[-(small_window.duration_s + 1)]), small_window)


def test_sparse_encode_rejects_out_of_range_second():
    with pytest.raises(WindowError):
        rle_encode_sparse(SparseSeries(seconds=[10], values=[1], length=5))


def test_parse_event_line_fields():
    event = parse_event_line("u1\tr1\t1000\tt1\t900\tauthor\n")
    assert event.delay == 100
    assert event.author == "author"
    assert parse_event_line("u1\tr1\t1000\tt1\t1000").source_user_id is None


@pytest.mark.parametrize("line", ["u1\tr1\t1000\tt1", "u1\tr1\tabc\tt1\t900", "u1\t\t1000\tt1\t900"])
def test_parse_event_line_malformed(line):
    with pytest.raises(MalformedRecordError):
        parse_event_line(line)


def test_parse_event_line_causality():
    with pytest.raises(CausalityError):
        parse_event_line("u1\tr1\t900\tt1\t1000")


def test_parse_events_skips_and_counts():
    lines = ["# comment\n", "\n", "u1\tr1\t1000\tt1\t900\n", "u1\tr2\t900\tt2\t1000\n", "bad\n"]
    report = ParseReport()
    events = parse_events(lines, report=report)
    assert [e.retweet_id for e in events] == ["r1"]
    assert report.n_lines == 5
    assert report.n_blank == 2
    assert report.n_malformed == 2
    assert report.n_causality == 1


def test_parse_events_strict_raises():
    with pytest.raises(CausalityError):
        parse_events(["u1\tr2\t900\tt2\t1000\n"], strict=True)


def test_window_end_is_exclusive(small_window):
    t0 = small_window.t_ref
    events = [_event("u", 0, t0, t0), _event("u", 1, small_window.end - 1, t0), _event("u", 2, small_window.end, t0),
              _event("u", 3, t0 - 1, t0 - 1)]
    series_map = build_user_series(events, small_window)
    assert [e.retweet_id for e in series_map["u"].events] == ["u-0", "u-1"]


def test_build_user_series_sorts_by_timestamp_then_id(small_window):
    t0 = small_window.t_ref
    events = [_event("b", 1, t0 + 5, t0), _event("a", 2, t0 + 3, t0), _event("a", 1, t0 + 3, t0)]
    series_map = build_user_series(events, small_window)
    assert list(series_map) == ["a", "b"]
    assert [e.retweet_id for e in series_map["a"].events] == ["a-1", "a-2"]


def test_activity_filter_boundaries():
    window = AnalysisWindow.from_days(0, 14)
    def series(user_id, n):
        events = [_event(user_id, k, k * 60, 0) for k in range(n)]
        return UserSeries(user_id=user_id, events=events, window=window)

    series_map = {"low": series("low", 27), "min": series("min", 28), "max": series("max", 700),
                  "high": series("high", 701)}
    kept = filter_users(series_map, 2.0, 50.0)
    assert sorted(kept) == ["max", "min"]


def _series_snapshot(series_map):
    return {user_id: [e.retweet_id for e in series.events] for user_id, series in series_map.items()}


def test_build_user_series_ignores_input_order(small_corpus):
    reference = build_user_series(small_corpus.events, small_corpus.window)
    rng = np.random.default_rng(3)
    for _ in range(3):
        shuffled = [small_corpus.events[i] for i in rng.permutation(len(small_corpus.events))]
        rebuilt = build_user_series(shuffled, small_corpus.window)
        assert list(rebuilt) == list(reference)
        assert _series_snapshot(rebuilt) == _series_snapshot(reference)


def test_activity_filter_is_idempotent(small_corpus):
    series_map = build_user_series(small_corpus.events, small_corpus.window)
    once = filter_users(series_map, 10.0, 30.0)
    assert 0 < len(once) < len(series_map)
    assert filter_users(once, 10.0, 30.0) == once


def test_series_file_round_trip(tmp_path, small_window):
    rle_map = {"u1": RleSequence(values=[3, -3, 4, -(small_window.duration_s - 5)]),
               "u2": RleSequence(values=[-small_window.duration_s])}
    path = tmp_path / "series.txt"
    with path.open("w", encoding="utf-8") as stream:
        assert write_series_file(rle_map, small_window, stream) == 2

    loaded, window = read_series_file(path)
    assert window == small_window
    assert loaded == rle_map

    buffer = io.StringIO()
    write_series_file(loaded, window, buffer)
    assert buffer.getvalue() == path.read_text(encoding="utf-8")
