import csv
import logging
from pathlib import Path
from typing import TextIO

import numpy as np

from rtbust.exceptions import ConfigurationError, InputNotFoundError
from rtbust.rtbust_detection.models import Label
from rtbust.rtbust_ingest.models import AnalysisWindow, RetweetEvent
from rtbust.rtbust_ingest.utils import write_events
from rtbust.rtbust_synth.models import BehaviorKind, BehaviorSpec, BotnetPool, CorpusSpec, LabeledCorpus

logger = logging.getLogger(__name__)

HUMAN_DELAY_MEDIAN_S = 300.0
HUMAN_DELAY_LOG_SIGMA = 1.5
DROPLET_PROBABILITY = 0.1
DROPLET_SIZE = (3, 8)
DROPLET_GAP_S = (2, 20)
DROPLET_STEP_BACK_S = (30, 1_800)
STRAIGHT_LINE_DELAY_S = (1, 10)
WATERFALL_GAP_S = (1, 5)


def _author_weights(n_authors: int) -> np.ndarray:
    weights = 1.0 / np.arange(1, n_authors + 1)
    return weights / weights.sum()


def _human_delay(rng: np.random.Generator) -> int:
    return max(1, int(round(rng.lognormal(np.log(HUMAN_DELAY_MEDIAN_S), HUMAN_DELAY_LOG_SIGMA))))


def _group_sizes(total: int, rng: np.random.Generator) -> list[int]:
    """Splits ``total`` retweets into singles and droplets of DROPLET_SIZE members."""
    sizes: list[int] = []
    remaining = total
    while remaining > 0:
        size = 1
        # A tail too short for a droplet stays as singles.
        if rng.random() < DROPLET_PROBABILITY and remaining >= DROPLET_SIZE[0]:
            size = min(int(rng.integers(DROPLET_SIZE[0], DROPLET_SIZE[1] + 1)), remaining)
        sizes.append(size)
        remaining -= size
    return sizes


def gen_human(spec: BehaviorSpec, window: AnalysisWindow, rng: np.random.Generator,
              user_id: str = "human", n_authors: int = 2_000) -> list[RetweetEvent]:
    """
    Generates one legitimate account.

    The number of retweets is Poisson with mean rate_per_day * window days.
    Retweets come in groups: a single retweet with a log-normal delay, or
    (with probability 0.1) a droplet of 3-8 retweets a few seconds apart
    walking a feed backwards, so delays grow strictly within the droplet.
    """
    if spec.kind is not BehaviorKind.HUMAN:
        raise ConfigurationError(f"gen_human needs a human behaviour, got {spec.kind.value}")
    total = int(rng.poisson(spec.rate_per_day * window.days))

    group_sizes = _group_sizes(total, rng)
    anchors = np.sort(rng.integers(window.t_ref, window.end, size=len(group_sizes)))
    weights = _author_weights(n_authors)
    events: list[RetweetEvent] = []
    for anchor, size in zip(anchors.tolist(), group_sizes):
        gaps = rng.integers(DROPLET_GAP_S[0], DROPLET_GAP_S[1] + 1, size=size - 1)
        offsets = np.concatenate([[0], np.cumsum(gaps)]).astype(np.int64)
        start = min(anchor, window.end - 1 - int(offsets[-1]))
        source_ts = start - _human_delay(rng)
        for offset in offsets.tolist():
            k = len(events)
            events.append(RetweetEvent(
                user_id=user_id,
                retweet_id=f"{user_id}-{k}",
                retweet_ts=start + offset,
                source_tweet_id=f"{user_id}-src-{k}",
                source_ts=source_ts,
                source_user_id=f"author-{int(rng.choice(n_authors, p=weights))}",
            ))
            source_ts -= int(rng.integers(DROPLET_STEP_BACK_S[0], DROPLET_STEP_BACK_S[1] + 1))
    return events


def gen_pool(botnet_id: str, window: AnalysisWindow, rng: np.random.Generator,
             rate_per_day: float = 600.0, lookback_s: int = 3 * 86_400, n_authors: int = 6) -> BotnetPool:
    """Draws the shared stream of original tweets a botnet retweets from."""
    start = window.t_ref - lookback_s
    expected = rate_per_day * (window.end - start) / 86_400
    timestamps = np.unique(rng.integers(start, window.end, size=int(rng.poisson(expected))))
    authors = rng.integers(0, n_authors, size=len(timestamps))
    return BotnetPool(
        botnet_id=botnet_id,
        tweet_ids=[f"{botnet_id}-tw-{i}" for i in range(len(timestamps))],
        timestamps=timestamps.astype(np.int64),
        authors=[f"{botnet_id}-author-{a}" for a in authors.tolist()],
        phase_s=float(rng.uniform(0.0, 86_400.0)),
    )


def _session_starts(spec: BehaviorSpec, window: AnalysisWindow, pool: BotnetPool,
                    rng: np.random.Generator) -> np.ndarray:
    # Sessions follow the botnet schedule, shifted per account and per session.
    account_shift = rng.normal(0.0, spec.jitter_s) if spec.jitter_s > 0 else 0.0
    first = window.t_ref + (pool.phase_s % spec.session_period_s) - spec.session_period_s
    starts = np.arange(first, window.end, spec.session_period_s) + account_shift
    if spec.jitter_s > 0:
        starts = starts + rng.normal(0.0, spec.jitter_s, size=len(starts))
    return starts


def _pool_event(user_id: str, k: int, retweet_ts: int, pool: BotnetPool, index: int) -> RetweetEvent:
    return RetweetEvent(
        user_id=user_id,
        retweet_id=f"{user_id}-{k}",
        retweet_ts=int(retweet_ts),
        source_tweet_id=pool.tweet_ids[index],
        source_ts=int(pool.timestamps[index]),
        source_user_id=pool.authors[index],
    )


def _gen_straight_line(spec, window, rng, pool, user_id) -> list[RetweetEvent]:
    starts = _session_starts(spec, window, pool, rng)
    in_sessions: set[int] = set()
    for start in starts.tolist():
        lo, hi = pool.between(start, start + spec.session_length_s - STRAIGHT_LINE_DELAY_S[1])
        in_sessions.update(range(lo, hi))
    eligible = [i for i in sorted(in_sessions) if window.t_ref <= pool.timestamps[i] < window.end - STRAIGHT_LINE_DELAY_S[1]]
    target = min(int(rng.poisson(spec.rate_per_day * window.days)), len(eligible))
    chosen = np.sort(rng.choice(np.asarray(eligible, dtype=np.int64), size=target, replace=False)) if target else []
    delays = rng.integers(STRAIGHT_LINE_DELAY_S[0], STRAIGHT_LINE_DELAY_S[1] + 1, size=len(chosen))
    return [_pool_event(user_id, k, pool.timestamps[i] + d, pool, int(i))
            for k, (i, d) in enumerate(zip(chosen, delays.tolist()))]


def _gen_triangular(spec, window, rng, pool, user_id) -> list[RetweetEvent]:
    starts = _session_starts(spec, window, pool, rng)
    per_session = spec.rate_per_day * window.days / max(len(starts), 1)
    events: list[RetweetEvent] = []
    for start in starts.tolist():
        n = int(rng.poisson(per_session))
        times = np.sort(rng.uniform(start, start + spec.session_length_s, size=n))
        for t in times.tolist():
            retweet_ts = int(t)
            if not window.t_ref <= retweet_ts < window.end:
                continue
            lo, hi = pool.between(start, retweet_ts)
            if hi <= lo:
                continue
            events.append(_pool_event(user_id, len(events), retweet_ts, pool, int(rng.integers(lo, hi))))
    return events


def _gen_waterfall(spec, window, rng, pool, user_id, lookback_s) -> list[RetweetEvent]:
    starts = _session_starts(spec, window, pool, rng)
    per_run = spec.rate_per_day * window.days / max(len(starts), 1)
    events: list[RetweetEvent] = []
    for start in starts.tolist():
        run_start = int(start)
        if not window.t_ref <= run_start < window.end:
            continue
        lo, hi = pool.between(run_start - lookback_s, run_start)
        m = min(max(int(rng.poisson(per_run)), 1), hi - lo)
        if m <= 0:
            continue
        # Reverse-chronological walk over a random subset of the feed.
        picks = np.sort(rng.choice(np.arange(lo, hi), size=m, replace=False))[::-1]
        gaps = rng.integers(WATERFALL_GAP_S[0], WATERFALL_GAP_S[1] + 1, size=m)
        times = run_start + np.cumsum(gaps) - gaps[0]
        for index, retweet_ts in zip(picks.tolist(), times.tolist()):
            if retweet_ts >= window.end:
                break
            events.append(_pool_event(user_id, len(events), retweet_ts, pool, index))
    return events


def gen_bot(spec: BehaviorSpec, window: AnalysisWindow, rng: np.random.Generator,
            shared_stream: BotnetPool | None = None, user_id: str = "bot",
            lookback_s: int = 3 * 86_400) -> list[RetweetEvent]:
    """
    Generates one automated account retweeting from its botnet's shared stream.

    straight_line: within sessions, retweets pool tweets 1-10 s after publication.
    triangular: fixed-period sessions retweeting pool tweets published between
        the session start and the retweet time.
    waterfall: periodic runs retweeting the feed in reverse-chronological order
        going back up to ``lookback_s``, 1-5 s apart.

    Raises:
        ConfigurationError: If the behaviour is human, or a botnet is named
            without its shared stream.
    """
    if not spec.kind.is_bot:
        raise ConfigurationError("gen_bot needs a bot behaviour, got human")
    if shared_stream is None:
        if spec.botnet_id is not None:
            raise ConfigurationError(f"account {user_id} belongs to botnet {spec.botnet_id} but no shared stream was given")
        shared_stream = gen_pool(f"{user_id}-solo", window, rng, lookback_s=lookback_s)

    if spec.kind is BehaviorKind.STRAIGHT_LINE:
        return _gen_straight_line(spec, window, rng, shared_stream, user_id)
    if spec.kind is BehaviorKind.TRIANGULAR:
        return _gen_triangular(spec, window, rng, shared_stream, user_id)
    return _gen_waterfall(spec, window, rng, shared_stream, user_id, lookback_s)


def _log_uniform(rng: np.random.Generator, low: float, high: float) -> float:
    return float(np.exp(rng.uniform(np.log(low), np.log(high))))


def gen_corpus(corpus_spec: CorpusSpec, seed: int) -> LabeledCorpus:
    """
    Generates a labelled corpus, deterministic in ``seed``.

    Every account and every botnet pool gets its own child of the seed's
    SeedSequence, so accounts can be generated independently. User ids are
    neutral (``u0000`` ...) and assigned in a seeded random order.
    """
    window = corpus_spec.window
    n_accounts = corpus_spec.n_accounts
    root = np.random.SeedSequence(seed)
    id_seq, pool_seq, account_seq = root.spawn(3)

    width = max(4, len(str(max(n_accounts - 1, 0))))
    order = np.random.default_rng(id_seq).permutation(n_accounts)
    user_ids = [f"u{int(i):0{width}d}" for i in order]

    botnets = sorted({g.behavior.botnet_id for g in corpus_spec.groups if g.behavior.botnet_id is not None})
    pools = {
        botnet_id: gen_pool(botnet_id, window, np.random.default_rng(child),
                            rate_per_day=corpus_spec.pool_rate_per_day,
                            lookback_s=corpus_spec.pool_lookback_s,
                            n_authors=corpus_spec.pool_authors)
        for botnet_id, child in zip(botnets, pool_seq.spawn(len(botnets)))
    }

    account_children = account_seq.spawn(n_accounts)
    events: list[RetweetEvent] = []
    truth: dict[str, Label] = {}
    position = 0
    for group in corpus_spec.groups:
        for _ in range(group.count):
            rng = np.random.default_rng(account_children[position])
            user_id = user_ids[position]
            position += 1
            behavior = group.behavior
            if group.rate_range is not None:
                behavior = behavior.model_copy(update={"rate_per_day": _log_uniform(rng, *group.rate_range)})
            if behavior.kind.is_bot:
                pool = pools.get(behavior.botnet_id) if behavior.botnet_id is not None else None
                events.extend(gen_bot(behavior, window, rng, pool, user_id=user_id,
                                      lookback_s=corpus_spec.pool_lookback_s))
                truth[user_id] = Label.BOT
            else:
                events.extend(gen_human(behavior, window, rng, user_id=user_id,
                                        n_authors=corpus_spec.human_authors))
                truth[user_id] = Label.HUMAN

    events.sort(key=lambda e: (e.retweet_ts, e.user_id, e.retweet_id))
    truth = dict(sorted(truth.items()))
    n_bots = sum(1 for label in truth.values() if label is Label.BOT)
    logger.info(f"Generated {len(events)} events for {len(truth)} accounts ({n_bots} bots), seed {seed}")
    return LabeledCorpus(events=events, truth=truth, seed=seed, window=window)


def write_truth(truth: dict[str, Label], stream: TextIO) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["user_id", "label"])
    for user_id, label in truth.items():
        writer.writerow([user_id, label.value])
    return len(truth)


def write_corpus(corpus: LabeledCorpus, events_path: str | Path, truth_path: str | Path) -> None:
    with Path(events_path).open("w", encoding="utf-8", newline="\n") as stream:
        write_events(corpus.events, stream)
    with Path(truth_path).open("w", encoding="utf-8", newline="") as stream:
        write_truth(corpus.truth, stream)


def load_corpus_spec(path: str | Path | None) -> CorpusSpec:
    if path is None:
        return CorpusSpec.default()
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(f"No such corpus spec: '{path}'")
    return CorpusSpec.model_validate_json(path.read_text(encoding="utf-8"))
