import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rtbust.exceptions import ConfigurationError
from rtbust.rtbust_ingest.models import RetweetEvent, UserSeries
from rtbust.rtbust_rtt.models import PALETTE
from rtbust.rtbust_rtt.utils import delay_histogram, parse_zoom, rtt_group, rtt_single
from rtbust.rtbust_synth.models import BehaviorKind, BehaviorSpec
from rtbust.rtbust_synth.utils import gen_bot, gen_pool

SVG = "{http://www.w3.org/2000/svg}"


def _series(user_id, window, pairs) -> UserSeries:
    events = [RetweetEvent(user_id=user_id, retweet_id=f"{user_id}-{k:04d}", retweet_ts=rt, source_tweet_id=f"t{k}",
                           source_ts=src) for k, (rt, src) in enumerate(pairs)]
    return UserSeries(user_id=user_id, events=events, window=window)


def _markers(svg: str, kind: str = "marker") -> list[ET.Element]:
    root = ET.fromstring(svg.encode("utf-8"))
    return [c for c in root.iter(f"{SVG}circle") if c.get("class") == kind]


def _bins(svg: str) -> list[int]:
    root = ET.fromstring(svg.encode("utf-8"))
    return [int(r.get("data-count")) for r in root.iter(f"{SVG}rect") if r.get("class") == "bin"]


def test_empty_series_renders_valid_svg(small_window):
    svg = rtt_single(_series("u", small_window, []), small_window)
    root = ET.fromstring(svg.encode("utf-8"))
    assert root.tag == f"{SVG}svg"
    assert root.get("width") == "600"
    assert _markers(svg) == []
    assert _bins(svg) == []


def test_single_point_position(small_window):
    t0 = small_window.t_ref
    svg = rtt_single(_series("u", small_window, [(t0 + 5_000, t0 + 1_000)]), small_window)
    (marker,) = _markers(svg)
    assert (marker.get("cx"), marker.get("cy")) == ("300.00", "500.00")
    assert marker.get("r") == "1"
    assert marker.get("fill") == PALETTE[0]


def test_markers_never_above_the_diagonal(small_window):
    rng = np.random.default_rng(0)
    t0 = small_window.t_ref
    retweets = np.sort(rng.integers(t0, small_window.end, 300))
    pairs = [(int(rt), int(rt - rng.integers(0, rt - t0 + 1))) for rt in retweets]
    svg = rtt_single(_series("u", small_window, pairs), small_window)
    for marker in _markers(svg):
        assert float(marker.get("cx")) + float(marker.get("cy")) >= 600.0 - 0.01
    assert sum(_bins(svg)) == 300


def test_delay_histogram_clips_into_end_bins():
    hist = delay_histogram([0, 1, 5, 10**9], upper_s=100.0, bins=10)
    assert len(hist.counts) == 10
    assert hist.total == 4
    assert hist.counts[0] == 2
    assert hist.counts[-1] == 1
    assert hist.edges[0] == 1.0
    assert hist.edges[-1] == pytest.approx(100.0)


def test_rendering_is_deterministic(small_window):
    t0 = small_window.t_ref
    series = _series("u", small_window, [(t0 + 10, t0), (t0 + 700, t0 + 20), (t0 + 9_000, t0 + 8_999)])
    assert rtt_single(series, small_window) == rtt_single(series, small_window)


def test_group_colours_cycle(small_window):
    t0 = small_window.t_ref
    series_list = [_series(f"u{k:02d}", small_window, [(t0 + 100 + k, t0 + k)]) for k in range(44)]
    svg = rtt_group(series_list, small_window)
    fills = [m.get("fill") for m in _markers(svg)]
    assert fills == [PALETTE[k % 12] for k in range(44)]


def test_group_of_one_matches_single(small_window):
    t0 = small_window.t_ref
    series = _series("u", small_window, [(t0 + 10, t0), (t0 + 4_000, t0 + 3_000)])
    single = [(m.get("cx"), m.get("cy")) for m in _markers(rtt_single(series, small_window))]
    group = [(m.get("cx"), m.get("cy")) for m in _markers(rtt_group([series], small_window))]
    assert single == group


def test_group_rejects_empty_list(small_window):
    with pytest.raises(ConfigurationError):
        rtt_group([], small_window)


def test_straight_line_bot_hugs_the_diagonal(small_window):
    rng = np.random.default_rng(1)
    pool = gen_pool("net-a", small_window, rng, rate_per_day=20_000.0, lookback_s=0)
    spec = BehaviorSpec(kind=BehaviorKind.STRAIGHT_LINE, rate_per_day=50.0, session_period_s=2_000.0,
                        session_length_s=1_000.0, botnet_id="net-a")
    events = gen_bot(spec, small_window, rng, pool, user_id="bot")
    assert events
    svg = rtt_single(UserSeries(user_id="bot", events=events, window=small_window), small_window)
    scale = 500.0 / small_window.duration_s
    for marker in _markers(svg):
        offset = float(marker.get("cx")) + float(marker.get("cy")) - 600.0
        assert -0.01 <= offset <= 10 * scale + 0.01


def test_zoom_inset(small_window):
    t0 = small_window.t_ref
    series = _series("u", small_window, [(t0 + 10, t0), (t0 + 9_000, t0 + 8_000)])
    svg = rtt_group([series], small_window, zoom=parse_zoom(f"{t0}:{t0 + 100}"))
    assert len(_markers(svg, "zoom-marker")) == 1


@pytest.mark.parametrize("text", ["10", "a:b", "20:10"])
def test_parse_zoom_rejects_bad_ranges(text):
    with pytest.raises(ConfigurationError):
        parse_zoom(text)
