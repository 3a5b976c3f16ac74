import logging
from argparse import Namespace
from pathlib import Path

from rtbust.cli import cli
from rtbust.rtbust_ingest.models import AnalysisWindow, DEFAULT_WINDOW_DAYS, ParseReport
from rtbust.rtbust_ingest.utils import (
    DEFAULT_MAX_RATE,
    DEFAULT_MIN_RATE,
    build_user_series,
    filter_users,
    read_events,
    rle_encode,
    write_series_file,
)

logger = logging.getLogger(__name__)


@cli.command("ingest", description="Parse retweet events, filter users by activity and write RLE series")
@cli.argument('--input', required=True, help='Tab-separated retweet events file')
@cli.argument('--window-start', required=True, type=int, help='Analysis window start (epoch seconds)')
@cli.argument('--window-days', type=float, default=DEFAULT_WINDOW_DAYS, help='Analysis window length in days')
@cli.argument('--min-rate', type=float, default=DEFAULT_MIN_RATE, help='Minimum mean retweets per day')
@cli.argument('--max-rate', type=float, default=DEFAULT_MAX_RATE, help='Maximum mean retweets per day')
@cli.argument('--strict', action='store_true', help='Fail on the first malformed line')
@cli.argument('--out', required=True, help='Series file to write')
def ingest(args: Namespace) -> int:
    window = AnalysisWindow.from_days(args.window_start, args.window_days)
    report = ParseReport()
    events = read_events(args.input, strict=args.strict, report=report)
    series_map = filter_users(build_user_series(events, window), args.min_rate, args.max_rate)
    rle_map = {user_id: rle_encode(series) for user_id, series in series_map.items()}

    out = Path(args.out)
    with out.open("w", encoding="utf-8") as stream:
        count = write_series_file(rle_map, window, stream)
    logger.info(f"Wrote {count} series to {out} ({report.n_malformed} malformed lines skipped)")
    return 0
