from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from voicesynth import ledger
from voicesynth.dataset import FeatureCorpus
from voicesynth.management.base import SingLabCommand
from voicesynth.pipeline import evaluate_acoustic, evaluate_directories, evaluate_vocoder


class Command(SingLabCommand):
    help = 'Compare predictions with a feature directory and print an EvalReport as JSON'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--ref', required=True, help='Reference feature directory')
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--pred', help='Directory of predicted <name>.wav or <name>.npz files')
        source.add_argument('--acoustic', help='Acoustic checkpoint, evaluated with ground-truth durations')
        source.add_argument('--vocoder', help='Vocoder checkpoint, evaluated by copy synthesis')
        parser.add_argument('--report', help='Also write the report JSON to this path')
        parser.add_argument('--device', default=settings.SINGLAB_DEVICE)

    def run(self, **options):
        corpus = FeatureCorpus(options['ref'])
        if options['pred']:
            report, prediction = evaluate_directories(options['pred'], corpus), options['pred']
        elif options['acoustic']:
            report = evaluate_acoustic(options['acoustic'], corpus, device=options['device'])
            prediction = options['acoustic']
        elif options['vocoder']:
            report = evaluate_vocoder(options['vocoder'], corpus, seed=options['seed'], device=options['device'])
            prediction = options['vocoder']
        else:
            raise CommandError('one of --pred, --acoustic or --vocoder is required')

        text = report.model_dump_json(indent=2)
        if options['report']:
            Path(options['report']).write_text(text, encoding='utf-8')
        record = ledger.record_evaluation(
            report, options['ref'], prediction, run=ledger.run_for_checkpoint(Path(prediction))
        )
        self.stdout.write(text)
        self.success(
            f'Evaluation #{record.pk}: mel L1 {report.aggregate.mel_l1:.4f}, '
            f'F0 RMSE {report.aggregate.f0_rmse_cents:.1f} cents, '
            f'V/UV error {report.aggregate.vuv_error_rate:.3f}'
        )
