import logging
from collections import Counter
from typing import Sequence

import numpy as np

from rtbust.exceptions import ConfigurationError, UndefinedInputError
from rtbust.rtbust_handcrafted.models import HandcraftedVector
from rtbust.rtbust_ingest.models import SECONDS_PER_DAY, UserSeries
from rtbust.rtbust_ingest.utils import window_day_index

logger = logging.getLogger(__name__)

DEFAULT_SESSION_GAP_S = 3_600


def shannon_entropy(counts: Sequence[int]) -> float:
    """
    Shannon entropy, in bits, of the distribution given by ``counts``.

    Raises:
        UndefinedInputError: If no count is positive, or a count is negative.
    """
    values = np.asarray(counts, dtype=np.float64)
    if values.size == 0 or np.any(values < 0) or values.sum() <= 0:
        raise UndefinedInputError("entropy needs non-negative counts with at least one positive")
    p = values[values > 0] / values.sum()
    return float(max(0.0, -np.sum(p * np.log2(p))))


def detect_sessions(retweet_timestamps: Sequence[int], gap_s: float = DEFAULT_SESSION_GAP_S) -> int:
    """
    Counts retweeting sessions: maximal runs of retweets whose consecutive
    gaps are all shorter than ``gap_s``.
    """
    if gap_s <= 0:
        raise ConfigurationError(f"session gap must be positive, got {gap_s}")
    ts = np.asarray(retweet_timestamps, dtype=np.int64)
    if ts.size == 0:
        return 0
    return int(1 + np.count_nonzero(np.diff(ts) >= gap_s))


def extract_handcrafted(user_series: UserSeries, session_gap_s: float = DEFAULT_SESSION_GAP_S) -> HandcraftedVector:
    """
    Computes the twelve handcrafted features of one account.

    Rates are per day over the whole window, day-of-publication entropy uses
    UTC calendar days, standard deviations are population ones. With fewer
    than two retweets the inter-retweet statistics are 0.

    Raises:
        UndefinedInputError: If the series is empty.
    """
    events = user_series.events
    if not events:
        raise UndefinedInputError(f"user {user_series.user_id} has no retweets")
    window = user_series.window
    retweet_ts = np.array([e.retweet_ts for e in events], dtype=np.int64)
    delays = np.array([e.delay for e in events], dtype=np.float64)

    authors = Counter(e.author for e in events)
    publication_days = Counter(e.source_ts // SECONDS_PER_DAY for e in events)
    active_days = {window_day_index(int(t), window) for t in retweet_ts}

    if retweet_ts.size >= 2:
        irts = np.diff(retweet_ts).astype(np.float64)
        min_irt, mean_irt, stdev_irt = float(irts.min()), float(irts.mean()), float(irts.std())
    else:
        min_irt = mean_irt = stdev_irt = 0.0

    rate = len(events) / window.days
    return HandcraftedVector(
        rt_users_entropy=shannon_entropy(list(authors.values())),
        rt_days_entropy=shannon_entropy(list(publication_days.values())),
        rt_rate=rate,
        daily_mean_rts=rate,
        rt_days=len(active_days),
        min_irt=min_irt,
        mean_irt=mean_irt,
        stdev_irt=stdev_irt,
        min_rt_delay=float(delays.min()),
        mean_rt_delay=float(delays.mean()),
        stdev_rt_delay=float(delays.std()),
        rt_sessions=detect_sessions(retweet_ts, session_gap_s),
    )


def handcrafted_matrix(series_map: dict[str, UserSeries]) -> tuple[list[str], np.ndarray]:
    """Features for every non-empty series, rows in series_map order."""
    user_ids: list[str] = []
    rows: list[np.ndarray] = []
    for user_id, series in series_map.items():
        if not series.events:
            logger.warning(f"Skipping user {user_id}: no retweets")
            continue
        user_ids.append(user_id)
        rows.append(extract_handcrafted(series).as_array())
    matrix = np.vstack(rows) if rows else np.zeros((0, 12))
    return user_ids, matrix


def standardize_columns(matrix: np.ndarray) -> np.ndarray:
    """Z-scores each column; constant columns become 0."""
    if matrix.shape[0] == 0:
        return matrix.copy()
    std = matrix.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    return np.where(std > 0, (matrix - matrix.mean(axis=0)) / safe, 0.0)
