import logging
from argparse import Namespace

from rtbust.cli import cli, resolve_seed
from rtbust.rtbust_ingest.utils import read_series_file
from rtbust.rtbust_linproj.models import DEFAULT_LATENT_DIM, DEFAULT_SEQ_LEN
from rtbust.rtbust_vae.models import DEFAULT_HIDDEN, VaeConfig
from rtbust.rtbust_vae.utils import save_model, train_on_series

logger = logging.getLogger(__name__)


@cli.command("train-vae", description="Train the LSTM variational autoencoder on RLE series")
@cli.argument('--series', required=True, help='Series file written by ingest')
@cli.argument('--dim', type=int, default=DEFAULT_LATENT_DIM, help='Latent dimension d')
@cli.argument('--hidden', type=int, default=DEFAULT_HIDDEN, help='LSTM hidden size h')
@cli.argument('--seq-len', type=int, default=DEFAULT_SEQ_LEN, help='Fixed sequence length L')
@cli.argument('--epochs', type=int, default=50, help='Training epochs')
@cli.argument('--batch-size', type=int, default=64, help='Mini-batch size')
@cli.argument('--learning-rate', type=float, default=1e-3, help='Adam learning rate')
@cli.argument('--kl-weight', type=float, default=1.0, help='Weight of the KL term')
@cli.argument('--seed', required=False, default=None, help='Unsigned 64-bit seed (fallback: RTBUST_SEED)')
@cli.argument('--model-out', required=True, help='Model file to write')
def train_vae(args: Namespace) -> int:
    config = VaeConfig(
        latent_dim=int(args.dim),
        lstm_hidden=int(args.hidden),
        max_seq_len=int(args.seq_len),
        epochs=int(args.epochs),
        batch_size=int(args.batch_size),
        learning_rate=float(args.learning_rate),
        kl_weight=float(args.kl_weight),
        seed=resolve_seed(args.seed),
    )
    rle_map, _ = read_series_file(args.series)
    result = train_on_series(config, rle_map)
    save_model(result.model, args.model_out)
    logger.info(f"Final loss {result.loss_trace[-1]:.6f} (first epoch {result.loss_trace[0]:.6f})")
    return 0
