import csv
import logging
import os
import platform
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import scipy

import rtbust
from rtbust.exceptions import ConfigurationError, InputNotFoundError, StageFailedError
from rtbust.logging_config import configure_utf8_logging, detach_trace_handlers
from rtbust.rtbust_cluster.models import ClusterParams
from rtbust.rtbust_cluster.utils import hdbscan, save_labeling
from rtbust.rtbust_detection.models import Label
from rtbust.rtbust_detection.utils import (
    compute_metrics,
    label_from_clusters,
    read_label_file,
    restrict_truth,
    write_labels,
    write_report,
)
from rtbust.rtbust_features.models import ExtractorKind, LatentTable
from rtbust.rtbust_features.utils import (
    clustering_matrix,
    fit_linear,
    handcrafted_table,
    linear_latents,
    save_latents,
    vae_latents,
)
from rtbust.rtbust_handcrafted.models import FEATURE_NAMES
from rtbust.rtbust_ingest.models import ParseReport, RleSequence, UserSeries
from rtbust.rtbust_ingest.utils import build_user_series, filter_users, read_events, rle_encode, write_series_file
from rtbust.rtbust_linproj.models import LinearProjector
from rtbust.rtbust_linproj.utils import save_projector
from rtbust.rtbust_pipeline.models import PipelineConfig, PipelineResult, StageRecord, SweepPoint
from rtbust.rtbust_vae.models import VaeModel
from rtbust.rtbust_vae.utils import save_model, train_on_series

logger = logging.getLogger(__name__)

PARTIAL_SUFFIX = ".partial"
SWEEP_HEADER = ["extractor", "latent_dim", "min_cluster_size", "n_clusters", "precision", "recall", "f1", "mcc"]


@contextmanager
def artifact_path(path: Path) -> Iterator[Path]:
    """
    Yields ``<path>.partial`` to write into and renames it to ``path`` on
    success. After a failure only the ``.partial`` file remains.
    """
    partial = path.with_name(path.name + PARTIAL_SUFFIX)
    yield partial
    os.replace(partial, path)


@contextmanager
def _stage(name: str, stages: list[StageRecord]) -> Iterator[dict]:
    counter = {"records": 0}
    started = time.perf_counter()
    logger.info(f"Stage '{name}' started")
    try:
        yield counter
    except StageFailedError:
        raise
    except Exception as e:
        logger.error(f"Stage '{name}' failed: {e}")
        raise StageFailedError(name, e) from e
    seconds = time.perf_counter() - started
    stages.append(StageRecord(stage=name, seconds=seconds, records=counter["records"]))
    logger.info(f"Stage '{name}' finished in {seconds:.2f}s with {counter['records']} records")


def prepare_series(config: PipelineConfig, report: ParseReport | None = None
                   ) -> tuple[dict[str, UserSeries], dict[str, RleSequence]]:
    """Reads events, applies the window and activity filter and RLE-encodes every kept account."""
    events = read_events(config.events_path, strict=config.strict, report=report)
    series_map = filter_users(build_user_series(events, config.window), config.min_rate, config.max_rate)
    rle_map = {user_id: rle_encode(series) for user_id, series in series_map.items()}
    return series_map, rle_map


def extract_table(kind: ExtractorKind, config: PipelineConfig, series_map: dict[str, UserSeries],
                  rle_map: dict[str, RleSequence], latent_dim: int | None = None
                  ) -> tuple[LatentTable, VaeModel | LinearProjector | None]:
    """
    Runs one extractor on the prepared corpus.

    Returns:
        tuple: the feature table and the fitted model (None for handcrafted).
    """
    d = latent_dim or config.latent_dim
    if kind is ExtractorKind.HANDCRAFTED:
        return handcrafted_table(series_map), None
    if kind is ExtractorKind.VAE:
        model = train_on_series(config.vae_config(d), rle_map).model
        return vae_latents(model, rle_map), model
    projector = fit_linear(kind, rle_map, d, config.seq_len, config.tica_lag)
    return linear_latents(projector, rle_map), projector


def _save_fitted(fitted: VaeModel | LinearProjector, path: Path) -> None:
    if isinstance(fitted, VaeModel):
        save_model(fitted, path)
    else:
        save_projector(fitted, path)


def _log_run_header(config: PipelineConfig) -> None:
    logger.info(f"rtbust {rtbust.__version__} (python {platform.python_version()}, numpy {np.__version__}, "
                f"scipy {scipy.__version__})")
    logger.info(f"Seed {config.seed}, extractor {config.extractor.value}, d={config.latent_dim}, "
                f"L={config.seq_len}, min_cluster_size={config.cluster.min_cluster_size}, "
                f"min_samples={config.cluster.min_samples}")
    logger.debug(f"Configuration: {config.model_dump_json()}")


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """
    ingest -> features -> cluster -> detect (-> eval with a truth file).

    Every stage writes its artifact into ``config.out_dir`` and the run trace
    goes to ``trace.log`` there.

    Raises:
        InputNotFoundError: If the events or truth file is missing.
        StageFailedError: If a stage fails; carries the stage name and cause.
    """
    if not Path(config.events_path).is_file():
        raise InputNotFoundError(f"No such events file: '{config.events_path}'")
    if config.truth_path is not None and not Path(config.truth_path).is_file():
        raise InputNotFoundError(f"No such truth file: '{config.truth_path}'")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.log"
    # The trace records at least INFO whatever the console level.
    configure_utf8_logging(min(logging.getLogger().getEffectiveLevel(), logging.INFO), str(trace_path))
    stages: list[StageRecord] = []
    try:
        _log_run_header(config)
        with _stage("ingest", stages) as counter:
            parse_report = ParseReport()
            series_map, rle_map = prepare_series(config, parse_report)
            with artifact_path(out_dir / "series.txt") as partial:
                with partial.open("w", encoding="utf-8") as stream:
                    write_series_file(rle_map, config.window, stream)
            counter["records"] = len(rle_map)
            if not rle_map:
                raise ConfigurationError("no account passes the activity filter")

        with _stage("features", stages) as counter:
            table, fitted = extract_table(config.extractor, config, series_map, rle_map)
            if fitted is not None:
                with artifact_path(out_dir / f"{config.extractor.value}.model") as partial:
                    _save_fitted(fitted, partial)
            with artifact_path(out_dir / "latents.csv") as partial:
                save_latents(table, partial)
            counter["records"] = len(table)

        with _stage("cluster", stages) as counter:
            labeling = hdbscan(clustering_matrix(table, config.extractor), config.cluster, table.user_ids)
            with artifact_path(out_dir / "clusters.csv") as partial:
                save_labeling(labeling, partial)
            counter["records"] = labeling.n_clusters

        labels_path = out_dir / "labels.csv"
        with _stage("detect", stages) as counter:
            detection = label_from_clusters(labeling)
            with artifact_path(labels_path) as partial:
                write_labels(detection, partial)
            counter["records"] = len(detection.bots)

        report = None
        report_path = None
        if config.truth_path is not None:
            report_path = out_dir / "report.json"
            with _stage("eval", stages) as counter:
                truth = restrict_truth(read_label_file(config.truth_path), detection.labels)
                report = compute_metrics(detection.labels, truth)
                with artifact_path(report_path) as partial:
                    write_report(report, partial)
                counter["records"] = len(truth)
                logger.info(f"precision={report.precision:.4f} recall={report.recall:.4f} "
                            f"f1={report.f1:.4f} mcc={report.mcc:.4f}")
        return PipelineResult(labels_path=labels_path, report_path=report_path, trace_path=trace_path,
                              detection=detection, report=report, stages=stages)
    finally:
        detach_trace_handlers()


def _score(table: LatentTable, kind: ExtractorKind, truth: dict[str, Label], params: ClusterParams,
           latent_dim: int) -> SweepPoint:
    labeling = hdbscan(clustering_matrix(table, kind), params, table.user_ids)
    detection = label_from_clusters(labeling)
    report = compute_metrics(detection.labels, restrict_truth(truth, detection.labels))
    return SweepPoint(extractor=kind.value, latent_dim=latent_dim, min_cluster_size=params.min_cluster_size,
                      n_clusters=labeling.n_clusters, f1=report.f1, mcc=report.mcc,
                      precision=report.precision, recall=report.recall)


def sweep_latent_dims(series_map: dict[str, UserSeries], truth: dict[str, Label],
                      extractors: Sequence[ExtractorKind], dims: Sequence[int],
                      config: PipelineConfig) -> list[SweepPoint]:
    """
    One point per (extractor, d). Handcrafted features have a fixed size and
    are scored once, reported with their 12 columns as latent_dim.

    Raises:
        ConfigurationError: If dims or extractors is empty.
    """
    if not dims:
        raise ConfigurationError("the latent-dimension sweep needs at least one dimension")
    if not extractors:
        raise ConfigurationError("the latent-dimension sweep needs at least one extractor")
    rle_map = {user_id: rle_encode(series) for user_id, series in series_map.items()}
    points: list[SweepPoint] = []
    for kind in extractors:
        for d in ([len(FEATURE_NAMES)] if kind is ExtractorKind.HANDCRAFTED else dims):
            table, _ = extract_table(kind, config, series_map, rle_map, d)
            point = _score(table, kind, truth, config.cluster, d)
            logger.info(f"{kind.value} d={d}: f1={point.f1:.4f} with {point.n_clusters} clusters")
            points.append(point)
    return points


def sweep_min_cluster_size(latents: LatentTable, truth: dict[str, Label], sizes: Sequence[int],
                           min_samples: int = 10, extractor: ExtractorKind = ExtractorKind.VAE
                           ) -> list[SweepPoint]:
    """One point per minimum cluster size, all on the same latents."""
    if not sizes:
        raise ConfigurationError("the min-cluster-size sweep needs at least one size")
    points = []
    for size in sizes:
        params = ClusterParams(min_cluster_size=size, min_samples=min_samples)
        point = _score(latents, extractor, truth, params, latents.d)
        logger.info(f"{extractor.value} min_cluster_size={size}: f1={point.f1:.4f}")
        points.append(point)
    return points


def write_sweep(points: Sequence[SweepPoint], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for p in points:
            writer.writerow([p.extractor, p.latent_dim, p.min_cluster_size, p.n_clusters,
                             repr(p.precision), repr(p.recall), repr(p.f1), repr(p.mcc)])
