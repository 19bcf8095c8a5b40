"""
EXCEPTIONS.PY - Error types raised by the toolkit

Every failure the numeric modules can report derives from SingLabError, so
management commands can turn any of them into a CommandError in one place.
Errors that describe a bad value also derive from ValueError.
"""


class SingLabError(Exception):
    """Base class for all toolkit errors."""


class ScoreParseError(SingLabError, ValueError):
    """A score file or note name could not be parsed."""


class PitchRangeError(SingLabError, ValueError):
    """A pitch falls outside the MIDI range 0-127."""


class DomainError(SingLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class LexiconMissError(SingLabError, KeyError):
    """One or more syllables have no entry in the phoneme lexicon."""

    def __init__(self, syllables):
        self.syllables = list(syllables)
        super().__init__(f"syllables missing from lexicon: {', '.join(self.syllables)}")

    def __str__(self):
        return self.args[0]


class FrameError(SingLabError, ValueError):
    """A waveform cannot be framed (too short, wrong rate, bad hop)."""


class StatsError(SingLabError, ValueError):
    """Normalization statistics are unusable (zero variance, no data)."""


class EmbeddingError(SingLabError, IndexError):
    """An input ID lies outside its embedding table."""


class ContractError(SingLabError, ValueError):
    """Shapes or lengths of related inputs disagree."""


class SpecError(SingLabError, ValueError):
    """A band, crop or model specification is invalid."""


class DataError(SingLabError):
    """Corpus or evaluation data is inconsistent."""


class CompatibilityError(SingLabError):
    """Two checkpoints or configs cannot be used together."""


class CheckpointError(SingLabError):
    """A checkpoint file is missing, corrupt or of the wrong kind."""
