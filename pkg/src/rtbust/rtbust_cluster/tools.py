import logging
from argparse import Namespace

from rtbust.cli import cli
from rtbust.rtbust_cluster.models import ClusterParams
from rtbust.rtbust_cluster.utils import hdbscan, save_labeling
from rtbust.rtbust_features.utils import load_latents
from rtbust.rtbust_handcrafted.utils import standardize_columns

logger = logging.getLogger(__name__)


@cli.command("cluster", description="Cluster feature vectors with HDBSCAN")
@cli.argument('--latents', required=True, help='Latents CSV written by features')
@cli.argument('--min-cluster-size', type=int, default=11, help='Smallest cluster HDBSCAN may report')
@cli.argument('--min-samples', type=int, default=10, help='Neighbour rank k for core distances')
@cli.argument('--standardize', action='store_true', help='Z-score every column first (handcrafted features)')
@cli.argument('--out', required=True, help='Clusters CSV to write')
def cluster(args: Namespace) -> int:
    params = ClusterParams(min_cluster_size=int(args.min_cluster_size), min_samples=int(args.min_samples))
    table = load_latents(args.latents)
    matrix = standardize_columns(table.matrix) if args.standardize else table.matrix
    labeling = hdbscan(matrix, params, table.user_ids)
    save_labeling(labeling, args.out)
    logger.info(f"Wrote {len(labeling.user_ids)} assignments ({labeling.n_clusters} clusters) to {args.out}")
    return 0
