import math

import numpy as np
import pytest

from rtbust.exceptions import UndefinedInputError
from rtbust.rtbust_handcrafted.models import FEATURE_NAMES
from rtbust.rtbust_handcrafted.utils import (
    detect_sessions,
    extract_handcrafted,
    handcrafted_matrix,
    shannon_entropy,
    standardize_columns,
)
from rtbust.rtbust_ingest.models import AnalysisWindow, RetweetEvent, UserSeries
from rtbust.rtbust_ingest.utils import build_user_series


@pytest.mark.parametrize("counts, expected", [([10], 0.0), ([1, 1, 1, 1], 2.0), ([3, 1], 0.8113)])
def test_shannon_entropy(counts, expected):
    assert shannon_entropy(counts) == pytest.approx(expected, abs=1e-4)


def test_shannon_entropy_rejects_empty():
    with pytest.raises(UndefinedInputError):
        shannon_entropy([0, 0])


def test_detect_sessions():
    assert detect_sessions([0, 100, 5000]) == 2
    assert detect_sessions([]) == 0
    assert detect_sessions([0, 3599, 7198]) == 1


def test_extract_handcrafted_worked_example():
    window = AnalysisWindow.from_days(0, 2)
    events = [
        RetweetEvent(user_id="u", retweet_id="r1", retweet_ts=10, source_tweet_id="t1", source_ts=5, source_user_id="A"),
        RetweetEvent(user_id="u", retweet_id="r2", retweet_ts=20, source_tweet_id="t2", source_ts=18, source_user_id="A"),
        RetweetEvent(user_id="u", retweet_id="r3", retweet_ts=90_000, source_tweet_id="t3", source_ts=80_000,
                     source_user_id="B"),
    ]
    v = extract_handcrafted(UserSeries(user_id="u", events=events, window=window))
    assert v.rt_users_entropy == pytest.approx(0.9183, abs=1e-4)
    assert v.rt_days_entropy == 0.0
    assert v.rt_rate == pytest.approx(1.5)
    assert v.daily_mean_rts == pytest.approx(1.5)
    assert v.rt_days == 2
    assert v.min_irt == 10.0
    assert v.mean_irt == pytest.approx(44_995.0)
    assert v.stdev_irt == pytest.approx(44_985.0)
    assert v.min_rt_delay == 2.0
    assert v.mean_rt_delay == pytest.approx(10_007.0 / 3.0)
    assert v.stdev_rt_delay == pytest.approx(float(np.std([5.0, 2.0, 10_000.0])))
    assert v.rt_sessions == 2


def test_single_retweet_has_zero_irt():
    window = AnalysisWindow.from_days(0, 1)
    event = RetweetEvent(user_id="u", retweet_id="r", retweet_ts=100, source_tweet_id="t", source_ts=40)
    v = extract_handcrafted(UserSeries(user_id="u", events=[event], window=window))
    assert (v.min_irt, v.mean_irt, v.stdev_irt) == (0.0, 0.0, 0.0)
    assert v.rt_users_entropy == 0.0
    assert v.rt_sessions == 1


def test_empty_series_is_undefined():
    with pytest.raises(UndefinedInputError):
        extract_handcrafted(UserSeries(user_id="u", events=[], window=AnalysisWindow.from_days(0, 1)))


def test_feature_invariants_on_corpus(small_corpus):
    series_map = build_user_series(small_corpus.events, small_corpus.window)
    user_ids, matrix = handcrafted_matrix(series_map)
    assert matrix.shape == (len(user_ids), len(FEATURE_NAMES))
    for user_id, row in zip(user_ids, matrix):
        f = dict(zip(FEATURE_NAMES, row))
        n = series_map[user_id].n_retweets
        assert f["rt_rate"] == f["daily_mean_rts"]
        assert f["min_irt"] <= f["mean_irt"]
        assert f["min_rt_delay"] <= f["mean_rt_delay"]
        assert 1 <= f["rt_days"] <= math.ceil(small_corpus.window.days)
        assert 1 <= f["rt_sessions"] <= n
        assert f["rt_users_entropy"] <= math.log2(n) + 1e-12


def test_standardize_columns():
    matrix = np.array([[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]])
    z = standardize_columns(matrix)
    assert np.allclose(z[:, 0].mean(), 0.0)
    assert np.allclose(z[:, 0].std(), 1.0)
    assert np.all(z[:, 1] == 0.0)
