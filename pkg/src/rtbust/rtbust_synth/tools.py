import logging
from argparse import Namespace

from rtbust.cli import cli, resolve_seed
from rtbust.rtbust_synth.utils import gen_corpus, load_corpus_spec, write_corpus

logger = logging.getLogger(__name__)


@cli.command("synth", description="Generate a labelled synthetic retweet corpus")
@cli.argument('--spec', required=False, default=None,
              help='JSON corpus spec (default: 200 humans and three botnets of 40/60/100)')
@cli.argument('--seed', required=False, default=None, help='Unsigned 64-bit seed (fallback: RTBUST_SEED)')
@cli.argument('--out', required=True, help='Events TSV to write')
@cli.argument('--truth', required=True, help='Truth CSV (user_id,label) to write')
def synth(args: Namespace) -> int:
    corpus_spec = load_corpus_spec(args.spec)
    corpus = gen_corpus(corpus_spec, resolve_seed(args.seed))
    write_corpus(corpus, args.out, args.truth)
    logger.info(f"Wrote {len(corpus.events)} events to {args.out} and {len(corpus.truth)} labels to {args.truth} "
                f"(window start {corpus.window.t_ref}, {corpus.window.days:g} days)")
    return 0
