from voicesynth.dataset import F0_SOURCES, extract_corpus_features
from voicesynth.management.base import SingLabCommand


class Command(SingLabCommand):
    help = 'Extract mel, F0 and V/UV features and normalization statistics from a corpus'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', required=True, help='Corpus directory written by gen_corpus')
        parser.add_argument('--out', required=True, help='Feature directory to create')
        parser.add_argument('--f0-source', choices=F0_SOURCES, default='tracker',
                            help='Take F0 from the pitch tracker or from the analytic ground truth')

    def run(self, **options):
        records = extract_corpus_features(
            options['data'], options['out'], self.config.feature,
            f0_source=options['f0_source'], progress=options['verbosity'] > 0,
        )
        frames = sum(r.features.n_frames for r in records)
        self.success(f"Extracted {len(records)} utterances ({frames} frames) to {options['out']}")
