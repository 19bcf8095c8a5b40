from django.conf import settings

from voicesynth.features import write_wav
from voicesynth.management.base import SingLabCommand
from voicesynth.pipeline import synthesize


class Command(SingLabCommand):
    help = 'Render a score JSON file to a 16-bit WAV with trained acoustic and vocoder checkpoints'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--score', required=True, help='Score JSON file')
        parser.add_argument('--acoustic', required=True, help='Acoustic model checkpoint')
        parser.add_argument('--vocoder', required=True, help='Vocoder checkpoint')
        parser.add_argument('--out', required=True, help='Output WAV path')
        parser.add_argument('--pitch-shift', type=int, default=0, help='Semitones added to every sung note')
        parser.add_argument('--device', default=settings.SINGLAB_DEVICE)

    def run(self, **options):
        result = synthesize(
            options['score'], options['acoustic'], options['vocoder'],
            pitch_shift=options['pitch_shift'], seed=options['seed'], device=options['device'],
        )
        write_wav(options['out'], result.waveform)
        self.success(
            f"Wrote {result.waveform.duration:.2f} s ({result.features.n_frames} frames) to {options['out']}"
        )
