from voicesynth.management.base import TrainCommand


class Command(TrainCommand):
    help = 'Train the score-to-feature acoustic model with sub-frequency discriminators'
    kind = 'acoustic'
