"""
Common options and error handling for the toolkit's management commands.

Every command accepts --seed, --config and --profile. Toolkit errors and
config validation errors surface as CommandError so the process exits with
a message instead of a traceback.
"""

from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from pydantic import ValidationError

from voicesynth import ledger
from voicesynth.config import PROFILES, load_config
from voicesynth.dataset import FeatureCorpus
from voicesynth.exceptions import SingLabError
from voicesynth.trainer import TRAINERS


class SingLabCommand(BaseCommand):

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=settings.SINGLAB_DEFAULT_SEED)
        parser.add_argument('--config', help='JSON experiment config overriding the profile')
        parser.add_argument('--profile', choices=sorted(PROFILES), help='Config profile (default: full)')

    def handle(self, *args, **options):
        try:
            self.config = load_config(options['config'], options['profile'])
            return self.run(**options)
        except (SingLabError, ValidationError) as exc:
            raise CommandError(str(exc)) from exc

    def run(self, **options):
        raise NotImplementedError

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))


class TrainCommand(SingLabCommand):
    """train_acoustic and train_vocoder differ only in ``kind``."""

    kind = ''

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', required=True, help='Feature directory written by extract_features')
        parser.add_argument('--out', required=True, help='Run directory for checkpoints and metrics.jsonl')
        parser.add_argument('--steps', type=int, help='Stop after this many total steps')
        parser.add_argument('--resume', help='Checkpoint to continue from')
        parser.add_argument('--checkpoint-every', type=int, default=settings.SINGLAB_CHECKPOINT_EVERY)
        parser.add_argument('--device', default=settings.SINGLAB_DEVICE)

    def run(self, **options):
        corpus = FeatureCorpus(options['data'])
        run = ledger.start_run(
            self.kind, self.config, options['seed'], Path(options['data']), Path(options['out']),
            corpus=ledger.corpus_for_features(corpus.manifest),
        )
        trainer = None

        def on_checkpoint(step, path):
            ledger.record_checkpoint(run, step, path, dict(trainer.state.loss_ema))

        try:
            trainer = TRAINERS[self.kind](
                self.config, corpus, options['out'], seed=options['seed'], device=options['device'],
                checkpoint_every=options['checkpoint_every'], on_checkpoint=on_checkpoint,
                progress=options['verbosity'] > 0,
            )
            if options['resume']:
                trainer.restore(options['resume'])
            path = trainer.run(options['steps'])
        except Exception as exc:
            ledger.finish_run(run, error=str(exc) or type(exc).__name__)
            raise
        ledger.finish_run(run)
        self.success(f'{self.kind} training reached step {trainer.state.step}; checkpoint {path}')
