from pathlib import Path

from voicesynth import ledger
from voicesynth.config import SyntheticCorpusSpec
from voicesynth.corpus import corpus_duration, default_lexicon, generate_corpus, write_corpus
from voicesynth.management.base import SingLabCommand
from voicesynth.score import PhonemeLexicon


class Command(SingLabCommand):
    help = 'Generate a synthetic singing corpus with analytic durations, F0 and V/UV'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='Corpus directory to create')
        parser.add_argument('--utterances', type=int, help='Override the number of utterances')
        parser.add_argument('--lexicon', help='Syllable lexicon JSON (default: built-in synthetic lexicon)')

    def run(self, **options):
        overrides = {'seed': options['seed']}
        if options['utterances']:
            overrides['n_utterances'] = options['utterances']
        spec = SyntheticCorpusSpec.model_validate({**self.config.corpus.model_dump(), **overrides})
        lexicon = PhonemeLexicon.load(options['lexicon']) if options['lexicon'] else default_lexicon()

        utterances = generate_corpus(spec, self.config.feature, lexicon, progress=options['verbosity'] > 0)
        out = write_corpus(utterances, Path(options['out']), lexicon, spec, self.config.feature)
        seconds = corpus_duration(utterances)
        ledger.record_corpus(
            out, spec.seed,
            {'corpus': spec.model_dump(mode='json'), 'feature': self.config.feature.model_dump(mode='json')},
            len(utterances), seconds,
        )
        self.success(f'Wrote {len(utterances)} utterances ({seconds:.1f} s) to {out}')
