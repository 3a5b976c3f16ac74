import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from rtbust.exceptions import (
    CausalityError,
    ConfigurationError,
    InputNotFoundError,
    MalformedRecordError,
    MalformedSequenceError,
    RtbustError,
    WindowError,
)
from rtbust.rtbust_ingest.models import (
    SECONDS_PER_DAY,
    AnalysisWindow,
    ParseReport,
    RetweetEvent,
    RleSequence,
    SparseSeries,
    UserSeries,
    event_sort_key,
)

logger = logging.getLogger(__name__)

DEFAULT_MIN_RATE = 2.0
DEFAULT_MAX_RATE = 50.0

SERIES_HEADER_PREFIX = "# window_start="


def parse_event_line(line: str) -> RetweetEvent:
    """
    Parses one tab-separated record.

    Fields: user_id, retweet_id, retweet_ts, source_tweet_id, source_ts and an
    optional sixth source_user_id.

    Raises:
        MalformedRecordError: If the field count or a timestamp is invalid.
        CausalityError: If the retweet precedes the original tweet.
    """
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) not in (5, 6):
        raise MalformedRecordError(f"expected 5 or 6 tab-separated fields, got {len(fields)}")
    if any(f == "" for f in fields):
        raise MalformedRecordError("empty field")
    user_id, retweet_id, retweet_ts, source_tweet_id, source_ts = fields[:5]
    try:
        retweet_ts_value = int(retweet_ts, 10)
        source_ts_value = int(source_ts, 10)
    except ValueError as e:
        raise MalformedRecordError(f"timestamps must be base-10 integers: {e}") from e
    if retweet_ts_value < source_ts_value:
        raise CausalityError(
            f"retweet {retweet_id} at {retweet_ts_value} precedes its source {source_tweet_id} at {source_ts_value}"
        )
    return RetweetEvent(
        user_id=user_id,
        retweet_id=retweet_id,
        retweet_ts=retweet_ts_value,
        source_tweet_id=source_tweet_id,
        source_ts=source_ts_value,
        source_user_id=fields[5] if len(fields) == 6 else None,
    )


def parse_events(record_stream: Iterable[str], strict: bool = False,
                 report: ParseReport | None = None) -> list[RetweetEvent]:
    """
    Parses newline-delimited retweet records, preserving their order.

    Blank lines and lines starting with ``#`` are ignored. Malformed lines are
    skipped with a warning, or raise in strict mode.

    Args:
        record_stream: Any iterable of text lines (an open file, a list).
        strict: Raise on the first malformed line instead of skipping it.
        report: Optional counters to fill in.

    Returns:
        list[RetweetEvent]: The parsed events in input order.
    """
    report = report if report is not None else ParseReport()
    events: list[RetweetEvent] = []
    try:
        for line_no, line in enumerate(record_stream, start=1):
            report.n_lines += 1
            if not line.strip() or line.startswith("#"):
                report.n_blank += 1
                continue
            try:
                events.append(parse_event_line(line))
            except MalformedRecordError as e:
                if isinstance(e, CausalityError):
                    report.n_causality += 1
                report.n_malformed += 1
                if strict:
                    raise type(e)(f"line {line_no}: {e}") from e
                logger.warning(f"Skipping line {line_no}: {e}")
    except (OSError, UnicodeDecodeError) as e:
        raise RtbustError(f"unreadable event stream: {e}") from e

    report.n_events = len(events)
    if report.n_malformed:
        logger.warning(f"Skipped {report.n_malformed} malformed line(s), "
                       f"{report.n_causality} of them violating causality")
    logger.info(f"Parsed {report.n_events} events from {report.n_lines} lines")
    return events


def read_events(path: str | Path, strict: bool = False, report: ParseReport | None = None) -> list[RetweetEvent]:
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(f"No such events file: '{path}'")
    with path.open("r", encoding="utf-8") as stream:
        return parse_events(stream, strict=strict, report=report)


def format_event(event: RetweetEvent) -> str:
    fields = [event.user_id, event.retweet_id, str(event.retweet_ts), event.source_tweet_id, str(event.source_ts)]
    if event.source_user_id is not None:
        fields.append(event.source_user_id)
    return "\t".join(fields)


def write_events(events: Iterable[RetweetEvent], stream: TextIO) -> int:
    count = 0
    for event in events:
        stream.write(format_event(event))
        stream.write("\n")
        count += 1
    return count


def build_user_series(events: Iterable[RetweetEvent], window: AnalysisWindow) -> dict[str, UserSeries]:
    """
    Groups events per user, drops the ones outside the window and sorts each
    user's events by (retweet_ts, retweet_id).

    Returns:
        dict[str, UserSeries]: One series per user, keyed and ordered by user id.
    """
    grouped: dict[str, list[RetweetEvent]] = defaultdict(list)
    dropped = 0
    for event in events:
        if not window.contains(event.retweet_ts):
            dropped += 1
            continue
        grouped[event.user_id].append(event)
    if dropped:
        logger.info(f"Dropped {dropped} events outside the analysis window")

    series_map = {}
    for user_id in sorted(grouped):
        user_events = sorted(grouped[user_id], key=event_sort_key)
        series_map[user_id] = UserSeries.model_construct(user_id=user_id, events=user_events, window=window)
    logger.info(f"Built {len(series_map)} user series")
    return series_map


def filter_users(series_map: dict[str, UserSeries], min_rate: float = DEFAULT_MIN_RATE,
                 max_rate: float = DEFAULT_MAX_RATE) -> dict[str, UserSeries]:
    """
    Keeps users whose mean number of retweets per day over the whole window
    lies in [min_rate, max_rate] (both bounds inclusive).

    Raises:
        ConfigurationError: If min_rate > max_rate.
    """
    if min_rate > max_rate:
        raise ConfigurationError(f"min_rate {min_rate} is greater than max_rate {max_rate}")
    kept = {user_id: series for user_id, series in series_map.items()
            if min_rate <= series.rate_per_day <= max_rate}
    logger.info(f"Activity filter [{min_rate}, {max_rate}] retweets/day kept {len(kept)} of {len(series_map)} users")
    return kept


def source_offset(event: RetweetEvent, window: AnalysisWindow) -> int:
    # A source published exactly at t_ref would collide with the zero symbol.
    return max(abs(event.source_ts - window.t_ref), 1)


def _encode_points(points: Iterable[tuple[int, int]], length: int) -> list[int]:
    values: list[int] = []
    cursor = 0
    for second, value in points:
        if second < 0 or second >= length:
            raise WindowError(f"second offset {second} outside [0, {length})")
        if second > cursor:
            values.append(-(second - cursor))
        elif second < cursor - 1:
            raise WindowError(f"second offset {second} is out of order")
        values.append(value)
        cursor = max(cursor, second + 1)
    if cursor < length:
        values.append(-(length - cursor))
    return values


def rle_encode(series: UserSeries) -> RleSequence:
    """
    Compresses a user's per-second retweet series without materialising it.

    Retweet seconds carry |t(x) - t_ref|; every run of empty seconds becomes
    the negated run length, including the trailing run up to the window end.
    Two retweets in the same second are kept as consecutive positive entries.

    Raises:
        WindowError: If an event lies outside the window.
    """
    window = series.window
    points = ((event.retweet_ts - window.t_ref, source_offset(event, window)) for event in series.events)
    return RleSequence(values=_encode_points(points, window.duration_s))


def rle_encode_sparse(sparse: SparseSeries) -> RleSequence:
    order = sorted(range(len(sparse.seconds)), key=lambda i: sparse.seconds[i])
    points = ((sparse.seconds[i], sparse.values[i]) for i in order)
    return RleSequence(values=_encode_points(points, sparse.length))


def _iter_decoded(values: list[int]) -> Iterator[tuple[int, int]]:
    cursor = 0
    previous_negative = False
    for position, value in enumerate(values):
        if value == 0:
            raise MalformedSequenceError(f"zero entry at position {position}")
        if value < 0:
            if previous_negative:
                raise MalformedSequenceError(f"consecutive negative entries at position {position}")
            cursor += -value
            previous_negative = True
            continue
        yield cursor, value
        cursor += 1
        previous_negative = False


def rle_decode(rle: RleSequence, window: AnalysisWindow | None = None) -> SparseSeries:
    """
    Expands an RLE sequence back into a sparse per-second series.

    Without a window the series length is the number of seconds the sequence
    covers; with a window it is the window duration. Consecutive positive
    entries decode to consecutive seconds, so same-second collisions do not
    survive the round trip.

    Raises:
        MalformedSequenceError: On zero entries or two consecutive negative entries,
            or when the sequence runs past the window.
    """
    seconds: list[int] = []
    values: list[int] = []
    for second, value in _iter_decoded(rle.values):
        seconds.append(second)
        values.append(value)
    length = rle.covered_seconds
    if window is not None:
        if length > window.duration_s:
            raise MalformedSequenceError(
                f"sequence covers {length} seconds, window holds {window.duration_s}")
        length = window.duration_s
    return SparseSeries(seconds=seconds, values=values, length=length)


def write_series_file(rle_map: dict[str, RleSequence], window: AnalysisWindow, stream: TextIO) -> int:
    stream.write(f"{SERIES_HEADER_PREFIX}{window.t_ref} duration_s={window.duration_s}\n")
    for user_id, rle in rle_map.items():
        stream.write(" ".join([user_id, *map(str, rle.values)]))
        stream.write("\n")
    return len(rle_map)


def read_series_file(path: str | Path) -> tuple[dict[str, RleSequence], AnalysisWindow | None]:
    """
    Reads a series file written by write_series_file.

    Returns:
        tuple: The per-user RLE sequences in file order, and the window from
        the header line (None when the header is absent).
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(f"No such series file: '{path}'")
    rle_map: dict[str, RleSequence] = {}
    window = None
    with path.open("r", encoding="utf-8") as stream:
        for line_no, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith(SERIES_HEADER_PREFIX):
                    window = _parse_series_header(line)
                continue
            user_id, *raw_values = line.split(" ")
            try:
                values = [int(v) for v in raw_values]
            except ValueError as e:
                raise MalformedSequenceError(f"{path}:{line_no}: {e}") from e
            rle_map[user_id] = RleSequence(values=values)
    logger.info(f"Read {len(rle_map)} series from {path}")
    return rle_map, window


def _parse_series_header(line: str) -> AnalysisWindow:
    try:
        fields = dict(part.split("=", 1) for part in line.lstrip("# ").split())
        return AnalysisWindow(t_ref=int(fields["window_start"]), duration_s=int(fields["duration_s"]))
    except (KeyError, ValueError) as e:
        raise MalformedSequenceError(f"bad series header '{line}': {e}") from e


def window_day_index(ts: int, window: AnalysisWindow) -> int:
    return (ts - window.t_ref) // SECONDS_PER_DAY
