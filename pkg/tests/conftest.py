import pytest

from rtbust.rtbust_ingest.models import AnalysisWindow
from rtbust.rtbust_synth.models import SYNTH_WINDOW_START, AccountGroup, BehaviorKind, BehaviorSpec, CorpusSpec
from rtbust.rtbust_synth.utils import gen_corpus, write_corpus


def pytest_configure(config):
    config.addinivalue_line("markers", "integration: mark test as integration")

def pytest_collection_modifyitems(config, items):
    run_integration = config.getoption("--runintegration")

    if run_integration:
        return  # allow all tests

    skip_marker = pytest.mark.skip(reason="Skipped integration test (use --runintegration to enable)")
    for item in items:
        if "integration" in item.keywords:
            item.add_marker(skip_marker)

def pytest_addoption(parser):
    parser.addoption(
        "--runintegration", action="store_true", default=False, help="Run integration tests"
    )


@pytest.fixture
def small_window() -> AnalysisWindow:
    return AnalysisWindow(t_ref=1_000_000, duration_s=10_000)


@pytest.fixture
def small_corpus_spec() -> CorpusSpec:
    """A three-day corpus: 30 humans and two botnets of 15 accounts."""
    return CorpusSpec(
        window_start=SYNTH_WINDOW_START,
        window_days=3,
        groups=[
            AccountGroup(behavior=BehaviorSpec(kind=BehaviorKind.HUMAN), count=30, rate_range=(5.0, 40.0)),
            AccountGroup(behavior=BehaviorSpec(kind=BehaviorKind.STRAIGHT_LINE, rate_per_day=20.0,
                                               session_period_s=21_600.0, session_length_s=7_200.0,
                                               botnet_id="net-a"), count=15),
            AccountGroup(behavior=BehaviorSpec(kind=BehaviorKind.WATERFALL, rate_per_day=25.0,
                                               session_period_s=14_400.0, session_length_s=600.0,
                                               botnet_id="net-c"), count=15),
        ],
    )


@pytest.fixture
def small_corpus(small_corpus_spec):
    return gen_corpus(small_corpus_spec, seed=7)


@pytest.fixture
def small_corpus_files(small_corpus, tmp_path):
    events_path = tmp_path / "events.tsv"
    truth_path = tmp_path / "truth.csv"
    write_corpus(small_corpus, events_path, truth_path)
    return events_path, truth_path, small_corpus
