import logging
from argparse import Namespace

from rtbust.cli import cli
from rtbust.exceptions import ConfigurationError
from rtbust.rtbust_cluster.utils import load_labeling
from rtbust.rtbust_detection.utils import (
    baseline_retweet_rate,
    compute_metrics,
    label_from_clusters,
    read_label_file,
    restrict_truth,
    write_labels,
    write_report,
)
from rtbust.rtbust_ingest.utils import build_user_series, read_events, read_series_file

logger = logging.getLogger(__name__)


@cli.command("detect", description="Label accounts as bots (clustered) or humans (noise), or apply the rate baseline")
@cli.argument('--clusters', required=False, default=None, help='Clusters CSV written by cluster')
@cli.argument('--baseline', action='store_true', help='Use the retweet-rate baseline instead of clusters')
@cli.argument('--series', required=False, default=None, help='Series file (baseline only)')
@cli.argument('--events', required=False, default=None, help='Events TSV (baseline only)')
@cli.argument('--out', required=True, help='labels.csv to write')
def detect(args: Namespace) -> int:
    if args.baseline:
        if not args.series or not args.events:
            raise ConfigurationError("--baseline needs --series and --events")
        rle_map, window = read_series_file(args.series)
        if window is None:
            raise ConfigurationError(f"{args.series} has no window header")
        series_map = build_user_series(read_events(args.events), window)
        result = baseline_retweet_rate({u: series_map[u] for u in rle_map if u in series_map})
    else:
        if not args.clusters:
            raise ConfigurationError("--clusters is required unless --baseline is given")
        result = label_from_clusters(load_labeling(args.clusters))
    write_labels(result, args.out)
    logger.info(f"Wrote {len(result.labels)} labels ({len(result.bots)} bots) to {args.out}")
    return 0


@cli.command("eval", description="Score predicted labels against a truth file")
@cli.argument('--pred', required=True, help='labels.csv written by detect')
@cli.argument('--truth', required=True, help='Truth CSV (user_id,label)')
@cli.argument('--out', required=True, help='report.json to write')
def evaluate(args: Namespace) -> int:
    pred = read_label_file(args.pred)
    truth = read_label_file(args.truth)
    # The truth may also cover accounts the activity filter dropped.
    report = compute_metrics(pred, restrict_truth(truth, pred))
    write_report(report, args.out)
    logger.info(f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f} "
                f"mcc={report.mcc:.4f}")
    return 0
