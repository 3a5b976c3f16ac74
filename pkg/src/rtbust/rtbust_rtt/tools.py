import logging
from argparse import Namespace
from pathlib import Path

from rtbust.cli import cli
from rtbust.exceptions import ConfigurationError, InputNotFoundError
from rtbust.rtbust_ingest.models import DEFAULT_WINDOW_DAYS, AnalysisWindow, RetweetEvent, UserSeries
from rtbust.rtbust_ingest.utils import build_user_series, read_events
from rtbust.rtbust_rtt.utils import parse_zoom, rtt_group, rtt_single

logger = logging.getLogger(__name__)


def _read_user_list(path: str) -> list[str]:
    file = Path(path)
    if not file.is_file():
        raise InputNotFoundError(f"No such user list: '{file}'")
    users = [line.strip() for line in file.read_text(encoding="utf-8").splitlines()]
    return [u for u in users if u and not u.startswith("#")]


def _spanning_window(events: list[RetweetEvent]) -> AnalysisWindow:
    if not events:
        return AnalysisWindow(t_ref=0, duration_s=1)
    start = min(e.retweet_ts for e in events)
    return AnalysisWindow(t_ref=start, duration_s=max(e.retweet_ts for e in events) - start + 1)


@cli.command("rtt", description="Draw the ReTweet-Tweet scatterplot of one account or a group as SVG")
@cli.argument('--events', required=True, help='Events TSV')
@cli.argument('--user', required=False, default=None, help='Single account to plot')
@cli.argument('--users', required=False, default=None, help='File listing one account id per line')
@cli.argument('--window-start', type=int, required=False, default=None, help='Window start (epoch seconds)')
@cli.argument('--window-days', type=float, default=DEFAULT_WINDOW_DAYS, help='Window length in days')
@cli.argument('--zoom', required=False, default=None, help='Zoomed sub-window t0:t1 (group plots)')
@cli.argument('--out', required=True, help='SVG file to write')
def rtt(args: Namespace) -> int:
    if bool(args.user) == bool(args.users):
        raise ConfigurationError("give exactly one of --user or --users")
    wanted = [args.user] if args.user else _read_user_list(args.users)
    wanted_set = set(wanted)
    events = [e for e in read_events(args.events) if e.user_id in wanted_set]

    window = AnalysisWindow.from_days(args.window_start, args.window_days) if args.window_start is not None else None
    series_map = build_user_series(events, window or _spanning_window(events))
    series_list = [series_map.get(u) or UserSeries(user_id=u, events=[], window=window or _spanning_window(events))
                   for u in wanted]
    missing = [u for u in wanted if u not in series_map]
    if missing:
        logger.warning(f"{len(missing)} account(s) have no retweets to plot: {', '.join(missing[:5])}")

    if args.user:
        svg = rtt_single(series_list[0], window)
    else:
        svg = rtt_group(series_list, window, parse_zoom(args.zoom) if args.zoom else None)
    Path(args.out).write_text(svg, encoding="utf-8")
    logger.info(f"Wrote RTT plot of {len(series_list)} account(s) to {args.out}")
    return 0
