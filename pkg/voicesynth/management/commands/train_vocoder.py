from voicesynth.management.base import TrainCommand


class Command(TrainCommand):
    help = 'Train the waveform generator with multi-length discriminators'
    kind = 'vocoder'
