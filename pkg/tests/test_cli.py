import json

import pytest

from rtbust.__main__ import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from rtbust.cli import load_config_file, resolve_seed
from rtbust.exceptions import ConfigurationError
from rtbust.rtbust_cluster.utils import load_labeling
from rtbust.rtbust_detection.utils import read_label_file
from rtbust.rtbust_synth.models import SYNTH_WINDOW_START


@pytest.fixture
def spec_file(tmp_path, small_corpus_spec):
    path = tmp_path / "corpus.json"
    path.write_text(small_corpus_spec.model_dump_json(), encoding="utf-8")
    return path


@pytest.fixture
def ingested(tmp_path, spec_file):
    events, truth, series = tmp_path / "events.tsv", tmp_path / "truth.csv", tmp_path / "series.txt"
    assert main(["synth", "--spec", str(spec_file), "--seed", "7", "--out", str(events), "--truth", str(truth)]) == EXIT_OK
    assert main(["ingest", "--input", str(events), "--window-start", str(SYNTH_WINDOW_START), "--window-days", "3",
                 "--out", str(series)]) == EXIT_OK
    return events, truth, series


def test_resolve_seed(monkeypatch):
    monkeypatch.delenv("RTBUST_SEED", raising=False)
    assert resolve_seed(None) == 0
    assert resolve_seed("42") == 42
    monkeypatch.setenv("RTBUST_SEED", "5")
    assert resolve_seed(None) == 5
    for bad in ("-1", str(2 ** 64), "seven"):
        with pytest.raises(ConfigurationError):
            resolve_seed(bad)


def test_load_config_file_normalises_keys(tmp_path):
    path = tmp_path / "rtbust.conf"
    path.write_text("window-start=100\nmin_rate=3\n", encoding="utf-8")
    assert load_config_file(str(path)) == {"window_start": "100", "min_rate": "3"}


def test_missing_input_is_a_usage_error(tmp_path):
    code = main(["ingest", "--input", str(tmp_path / "absent.tsv"), "--window-start", "0",
                 "--out", str(tmp_path / "series.txt")])
    assert code == EXIT_USAGE


def test_unknown_extractor_is_rejected_by_the_parser(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["features", "--extractor", "lda", "--series", "s.txt", "--out", str(tmp_path / "l.csv")])
    assert excinfo.value.code == 2


def test_step_by_step_commands(tmp_path, ingested):
    events, truth, series = ingested
    latents, projector = tmp_path / "latents.csv", tmp_path / "pca.model"
    clusters, labels, report = tmp_path / "clusters.csv", tmp_path / "labels.csv", tmp_path / "report.json"

    assert main(["features", "--extractor", "pca", "--series", str(series), "--dim", "3", "--seq-len", "32",
                 "--model-out", str(projector), "--out", str(latents)]) == EXIT_OK
    assert main(["features", "--extractor", "pca", "--series", str(series), "--model", str(projector),
                 "--out", str(tmp_path / "again.csv")]) == EXIT_OK
    assert (tmp_path / "again.csv").read_bytes() == latents.read_bytes()

    assert main(["cluster", "--latents", str(latents), "--min-cluster-size", "5", "--min-samples", "4",
                 "--out", str(clusters)]) == EXIT_OK
    assert main(["detect", "--clusters", str(clusters), "--out", str(labels)]) == EXIT_OK
    assert main(["eval", "--pred", str(labels), "--truth", str(truth), "--out", str(report)]) == EXIT_OK

    assert set(read_label_file(labels)) == set(load_labeling(clusters).user_ids)
    assert set(json.loads(report.read_text(encoding="utf-8"))) >= {"precision", "recall", "accuracy", "f1", "mcc"}


def test_handcrafted_features_and_baseline(tmp_path, ingested):
    events, _, series = ingested
    latents, clusters = tmp_path / "latents.csv", tmp_path / "clusters.csv"
    assert main(["features", "--extractor", "handcrafted", "--series", str(series), "--events", str(events),
                 "--out", str(latents)]) == EXIT_OK
    assert main(["cluster", "--latents", str(latents), "--standardize", "--min-cluster-size", "5",
                 "--min-samples", "4", "--out", str(clusters)]) == EXIT_OK
    assert main(["detect", "--baseline", "--series", str(series), "--events", str(events),
                 "--out", str(tmp_path / "baseline.csv")]) == EXIT_OK
    assert main(["features", "--extractor", "handcrafted", "--series", str(series),
                 "--out", str(latents)]) == EXIT_USAGE


def test_train_vae_and_extract(tmp_path, ingested):
    _, _, series = ingested
    model = tmp_path / "vae.model"
    assert main(["train-vae", "--series", str(series), "--dim", "2", "--hidden", "4", "--seq-len", "16",
                 "--epochs", "1", "--seed", "3", "--model-out", str(model)]) == EXIT_OK
    assert main(["features", "--extractor", "vae", "--series", str(series), "--model", str(model),
                 "--out", str(tmp_path / "latents.csv")]) == EXIT_OK

    model.write_text("RTBUST-VAE v1 d=2\n", encoding="utf-8")
    assert main(["features", "--extractor", "vae", "--series", str(series), "--model", str(model),
                 "--out", str(tmp_path / "latents.csv")]) == EXIT_FAILURE


def test_rtt_command(tmp_path, ingested):
    events, truth, _ = ingested
    bots = [u for u, label in read_label_file(truth).items() if label.value == "bot"]
    users = tmp_path / "users.txt"
    users.write_text("\n".join(bots) + "\n", encoding="utf-8")
    single, group = tmp_path / "single.svg", tmp_path / "group.svg"
    assert main(["rtt", "--events", str(events), "--user", bots[0], "--out", str(single)]) == EXIT_OK
    assert main(["rtt", "--events", str(events), "--users", str(users), "--window-start", str(SYNTH_WINDOW_START),
                 "--window-days", "3", "--out", str(group)]) == EXIT_OK
    assert single.read_text(encoding="utf-8").startswith("<?xml")
    assert main(["rtt", "--events", str(events), "--out", str(single)]) == EXIT_USAGE


def test_run_command(tmp_path, spec_file):
    events, truth = tmp_path / "events.tsv", tmp_path / "truth.csv"
    main(["synth", "--spec", str(spec_file), "--seed", "7", "--out", str(events), "--truth", str(truth)])
    out_dir = tmp_path / "run"
    code = main(["run", "--events", str(events), "--window-start", str(SYNTH_WINDOW_START), "--window-days", "3",
                 "--extractor", "pca", "--dim", "3", "--seq-len", "32", "--min-cluster-size", "5",
                 "--min-samples", "4", "--truth", str(truth), "--out-dir", str(out_dir)])
    assert code == EXIT_OK
    assert (out_dir / "report.json").is_file()
    assert not list(out_dir.glob("*.partial"))


def test_run_command_error_codes(tmp_path):
    empty = tmp_path / "events.tsv"
    empty.write_text("", encoding="utf-8")
    common = ["run", "--events", str(empty), "--window-start", "0", "--out-dir", str(tmp_path / "run")]
    assert main(common + ["--extractor", "pca", "--dim", "2", "--seq-len", "8"]) == EXIT_USAGE
    assert main(common + ["--min-rate", "10", "--max-rate", "5"]) == EXIT_USAGE
    assert main(common[:2] + [str(tmp_path / "absent.tsv")] + common[3:]) == EXIT_USAGE


def test_config_file_supplies_defaults(tmp_path, ingested):
    events, _, _ = ingested
    conf = tmp_path / "rtbust.conf"
    conf.write_text("min-rate=1000\nmax-rate=2000\n", encoding="utf-8")
    out = tmp_path / "filtered.txt"
    assert main(["ingest", "--config", str(conf), "--input", str(events), "--window-start", str(SYNTH_WINDOW_START),
                 "--window-days", "3", "--out", str(out)]) == EXIT_OK
    assert out.read_text(encoding="utf-8").splitlines()[1:] == []


def test_config_file_flags_parse_as_booleans(tmp_path, ingested):
    events, _, _ = ingested
    dirty = tmp_path / "dirty.tsv"
    dirty.write_text(events.read_text(encoding="utf-8") + "not\ta\tvalid line\n", encoding="utf-8")
    conf = tmp_path / "rtbust.conf"
    command = ["ingest", "--config", str(conf), "--input", str(dirty), "--window-start", str(SYNTH_WINDOW_START),
               "--window-days", "3", "--out", str(tmp_path / "out.txt")]

    conf.write_text("strict=false\n", encoding="utf-8")
    assert main(command) == EXIT_OK
    conf.write_text("strict=true\n", encoding="utf-8")
    assert main(command) == EXIT_FAILURE
    conf.write_text("strict=maybe\n", encoding="utf-8")
    assert main(command) == EXIT_USAGE
