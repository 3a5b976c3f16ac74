import logging
from argparse import Namespace
from pathlib import Path

from rtbust.cli import cli, resolve_seed
from rtbust.exceptions import ConfigurationError, InputNotFoundError
from rtbust.rtbust_cluster.models import ClusterParams
from rtbust.rtbust_detection.utils import read_label_file
from rtbust.rtbust_features.models import ExtractorKind
from rtbust.rtbust_ingest.models import DEFAULT_WINDOW_DAYS
from rtbust.rtbust_ingest.utils import DEFAULT_MAX_RATE, DEFAULT_MIN_RATE
from rtbust.rtbust_linproj.models import DEFAULT_LATENT_DIM, DEFAULT_SEQ_LEN, DEFAULT_TICA_LAG
from rtbust.rtbust_pipeline.models import PipelineConfig
from rtbust.rtbust_pipeline.utils import (
    extract_table,
    prepare_series,
    run_pipeline,
    sweep_latent_dims,
    sweep_min_cluster_size,
    write_sweep,
)
from rtbust.rtbust_vae.models import DEFAULT_HIDDEN

logger = logging.getLogger(__name__)


def _pipeline_arguments(func):
    """Flags shared by run and sweep."""
    for args, kwargs in reversed([
        (('--events',), dict(required=True, help='Tab-separated retweet events file')),
        (('--window-start',), dict(required=True, type=int, help='Analysis window start (epoch seconds)')),
        (('--window-days',), dict(type=float, default=DEFAULT_WINDOW_DAYS, help='Window length in days')),
        (('--min-rate',), dict(type=float, default=DEFAULT_MIN_RATE, help='Minimum mean retweets per day')),
        (('--max-rate',), dict(type=float, default=DEFAULT_MAX_RATE, help='Maximum mean retweets per day')),
        (('--seq-len',), dict(type=int, default=DEFAULT_SEQ_LEN, help='Fixed sequence length L')),
        (('--lag',), dict(type=int, default=DEFAULT_TICA_LAG, help='TICA lag')),
        (('--min-cluster-size',), dict(type=int, default=11, help='HDBSCAN minimum cluster size')),
        (('--min-samples',), dict(type=int, default=10, help='HDBSCAN min_samples')),
        (('--hidden',), dict(type=int, default=DEFAULT_HIDDEN, help='VAE LSTM hidden size')),
        (('--epochs',), dict(type=int, default=50, help='VAE training epochs')),
        (('--batch-size',), dict(type=int, default=64, help='VAE mini-batch size')),
        (('--learning-rate',), dict(type=float, default=1e-3, help='VAE Adam learning rate')),
        (('--kl-weight',), dict(type=float, default=1.0, help='Weight of the KL term')),
        (('--seed',), dict(required=False, default=None, help='Unsigned 64-bit seed (fallback: RTBUST_SEED)')),
        (('--strict',), dict(action='store_true', help='Fail on the first malformed event line')),
    ]):
        func = cli.argument(*args, **kwargs)(func)
    return func


def _config_from_args(args: Namespace, out_dir: Path, truth: str | None,
                      extractor: str = ExtractorKind.VAE.value, latent_dim: int = DEFAULT_LATENT_DIM) -> PipelineConfig:
    return PipelineConfig(
        events_path=Path(args.events),
        out_dir=out_dir,
        truth_path=Path(truth) if truth else None,
        window_start=int(args.window_start),
        window_days=float(args.window_days),
        min_rate=float(args.min_rate),
        max_rate=float(args.max_rate),
        strict=bool(args.strict),
        extractor=ExtractorKind(extractor),
        latent_dim=int(latent_dim),
        seq_len=int(args.seq_len),
        tica_lag=int(args.lag),
        cluster=ClusterParams(min_cluster_size=int(args.min_cluster_size), min_samples=int(args.min_samples)),
        lstm_hidden=int(args.hidden),
        epochs=int(args.epochs),
        batch_size=int(args.batch_size),
        learning_rate=float(args.learning_rate),
        kl_weight=float(args.kl_weight),
        seed=resolve_seed(args.seed),
    )


def _int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"{flag} takes comma-separated integers, got '{text}'") from e
    if not values:
        raise ConfigurationError(f"{flag} is empty")
    return values


@cli.command("run", description="Run ingest, features, cluster, detect (and eval) end to end")
@_pipeline_arguments
@cli.argument('--extractor', choices=[k.value for k in ExtractorKind], default=ExtractorKind.VAE.value,
              help='Feature extractor')
@cli.argument('--dim', type=int, default=DEFAULT_LATENT_DIM, help='Latent dimension d')
@cli.argument('--truth', required=False, default=None, help='Truth CSV; enables the eval stage')
@cli.argument('--out-dir', required=True, help='Directory for the stage artifacts and trace.log')
def run(args: Namespace) -> int:
    config = _config_from_args(args, Path(args.out_dir), args.truth, args.extractor, args.dim)
    result = run_pipeline(config)
    logger.info(f"Labels written to {result.labels_path}"
                + (f", report to {result.report_path}" if result.report_path else ""))
    return 0


@cli.command("sweep", description="Score extractors over latent sizes and minimum cluster sizes")
@_pipeline_arguments
@cli.argument('--truth', required=True, help='Truth CSV (user_id,label)')
@cli.argument('--extractors', default="vae,pca,tica,handcrafted", help='Comma-separated extractors')
@cli.argument('--dims', default="2,4,8,12", help='Comma-separated latent dimensions')
@cli.argument('--dim', type=int, default=DEFAULT_LATENT_DIM, help='Latent dimension of the cluster-size sweep')
@cli.argument('--min-cluster-sizes', default=None, help='Comma-separated minimum cluster sizes to sweep')
@cli.argument('--out', required=True, help='Sweep CSV to write')
def sweep(args: Namespace) -> int:
    try:
        extractors = [ExtractorKind(name.strip()) for name in args.extractors.split(",") if name.strip()]
    except ValueError as e:
        raise ConfigurationError(f"unknown extractor in '{args.extractors}'") from e
    dims = _int_list(args.dims, "--dims")
    out = Path(args.out)
    config = _config_from_args(args, out.parent, args.truth, latent_dim=max(1, min(dims)))
    if not config.events_path.is_file():
        raise InputNotFoundError(f"No such events file: '{config.events_path}'")

    truth = read_label_file(args.truth)
    series_map, rle_map = prepare_series(config)
    points = sweep_latent_dims(series_map, truth, extractors, dims, config)
    if args.min_cluster_sizes:
        sizes = _int_list(args.min_cluster_sizes, "--min-cluster-sizes")
        for kind in extractors:
            table, _ = extract_table(kind, config, series_map, rle_map, int(args.dim))
            points.extend(sweep_min_cluster_size(table, truth, sizes, config.cluster.min_samples, kind))
    write_sweep(points, out)
    logger.info(f"Wrote {len(points)} sweep points to {out}")
    return 0
