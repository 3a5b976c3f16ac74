import logging
from argparse import Namespace

from rtbust.cli import cli
from rtbust.exceptions import ConfigurationError
from rtbust.rtbust_features.models import ExtractorKind
from rtbust.rtbust_features.utils import fit_linear, handcrafted_table, linear_latents, save_latents, vae_latents
from rtbust.rtbust_ingest.utils import build_user_series, read_events, read_series_file
from rtbust.rtbust_linproj.models import DEFAULT_LATENT_DIM, DEFAULT_SEQ_LEN, DEFAULT_TICA_LAG, ProjectorKind
from rtbust.rtbust_linproj.utils import load_projector, save_projector
from rtbust.rtbust_vae.utils import load_model

logger = logging.getLogger(__name__)


@cli.command("features", description="Extract per-account feature vectors (vae, pca, tica or handcrafted)")
@cli.argument('--extractor', required=True, choices=[k.value for k in ExtractorKind], help='Feature extractor')
@cli.argument('--series', required=True, help='Series file written by ingest')
@cli.argument('--events', required=False, default=None, help='Events TSV (handcrafted extractor only)')
@cli.argument('--model', required=False, default=None,
              help='Trained VAE model (vae) or a saved projector to reuse (pca/tica)')
@cli.argument('--model-out', required=False, default=None, help='Where to save a freshly fitted projector')
@cli.argument('--dim', type=int, default=DEFAULT_LATENT_DIM, help='Latent dimension d (pca/tica)')
@cli.argument('--seq-len', type=int, default=DEFAULT_SEQ_LEN, help='Fixed sequence length L (pca/tica)')
@cli.argument('--lag', type=int, default=DEFAULT_TICA_LAG, help='TICA lag')
@cli.argument('--out', required=True, help='Latents CSV to write')
def features(args: Namespace) -> int:
    kind = ExtractorKind(args.extractor)
    rle_map, window = read_series_file(args.series)

    if kind is ExtractorKind.VAE:
        if not args.model:
            raise ConfigurationError("--model is required for the vae extractor")
        table = vae_latents(load_model(args.model), rle_map)
    elif kind is ExtractorKind.HANDCRAFTED:
        if not args.events:
            raise ConfigurationError("--events is required for the handcrafted extractor")
        if window is None:
            raise ConfigurationError(f"{args.series} has no window header")
        series_map = build_user_series(read_events(args.events), window)
        table = handcrafted_table({u: series_map[u] for u in rle_map if u in series_map})
    else:
        projector_kind = ProjectorKind(kind.value)
        if args.model:
            projector = load_projector(args.model, projector_kind)
        else:
            projector = fit_linear(kind, rle_map, int(args.dim), int(args.seq_len), int(args.lag))
            if args.model_out:
                save_projector(projector, args.model_out)
                logger.info(f"Saved {kind.value} projector to {args.model_out}")
        table = linear_latents(projector, rle_map)

    save_latents(table, args.out)
    logger.info(f"Wrote {len(table)} {kind.value} feature vectors of dimension {table.d} to {args.out}")
    return 0
