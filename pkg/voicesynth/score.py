"""
SCORE.PY - Music score parsing and encoding

Turns a score (lyrics, note names, note values, tempo) into the per-phoneme
triples the acoustic model consumes: phoneme ID, MIDI pitch ID and note
duration in frames. A note with k phonemes contributes k triples that share
the note's pitch and duration.

Rests use the reserved pitch ID 128 and the silence phoneme.
"""

import json
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import DomainError, LexiconMissError, PitchRangeError, ScoreParseError

REST_PITCH_ID = 128
REST_MARKERS = frozenset({'rest', 'r', 'sil'})
SILENCE_PHONEME = 'sil'
PAD_PHONEME = '<pad>'

_CHROMA = {'C': 0, 'D': 2, 'E': 4, 'F': 5, 'G': 7, 'A': 9, 'B': 11}
_ACCIDENTALS = {'': 0, '#': 1, 's': 1, 'b': -1, '##': 2, 'bb': -2}
_NOTE_RE = re.compile(r'^([A-Ga-g])(##|bb|#|s|b)?(-?\d+)$')


# === PITCH ===

def note_to_midi(note_name: str) -> int:
    """Return the MIDI number of a scientific-pitch name such as "C4" or "F#-1"."""
    match = _NOTE_RE.match(note_name.strip())
    if not match:
        raise ScoreParseError(f'malformed note name {note_name!r}')
    letter, accidental, octave = match.groups()
    midi = 12 * (int(octave) + 1) + _CHROMA[letter.upper()] + _ACCIDENTALS[accidental or '']
    if not 0 <= midi <= 127:
        raise PitchRangeError(f'{note_name} maps to MIDI {midi}, outside 0..127')
    return midi


def midi_to_hz(pitch_id: int) -> float:
    if not 0 <= pitch_id <= 127:
        raise PitchRangeError(f'pitch ID {pitch_id} outside 0..127')
    return semitone_to_hz(pitch_id)


def semitone_to_hz(semitones):
    """Fractional MIDI value to Hz; works on floats, numpy arrays and tensors."""
    return 440.0 * 2.0 ** ((semitones - 69.0) / 12.0)


def hz_to_semitone(hz):
    """Hz to fractional MIDI value; inputs must be positive."""
    return 69.0 + 12.0 * np.log2(np.asarray(hz, dtype=np.float64) / 440.0)


# === DURATION ===

def quantize_duration(value, tempo: float, beat_unit: int, hop: float) -> int:
    """Frames covered by a note ``value`` (fraction of a whole note).

    One beat lasts 60/tempo seconds and a beat is a 1/beat_unit note, so with
    beat_unit 4 a quarter note lasts exactly one beat. Rounds half up with a
    floor of one frame.
    """
    value = Fraction(value)
    for name, number in (('value', value), ('tempo', tempo), ('beat_unit', beat_unit), ('hop', hop)):
        if not number > 0 or not math.isfinite(float(number)):
            raise DomainError(f'{name} must be positive and finite, got {number}')
    seconds = float(value) * beat_unit * 60.0 / tempo
    frames = math.floor(seconds / hop + 0.5 + 1e-9)
    return max(1, frames)


# === SCORE TYPES ===

class Note(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, arbitrary_types_allowed=True)

    syllable: str
    phonemes: tuple[str, ...] = ()
    note_name: str = Field(alias='note')
    value: Fraction

    @field_validator('value', mode='before')
    @classmethod
    def _parse_value(cls, raw):
        try:
            value = Fraction(str(raw))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f'bad note value {raw!r}') from exc
        if value <= 0:
            raise ValueError(f'note value {raw} must be positive')
        return value

    @property
    def is_rest(self) -> bool:
        return self.note_name.strip().lower() in REST_MARKERS

    @property
    def pitch_id(self) -> int:
        return REST_PITCH_ID if self.is_rest else note_to_midi(self.note_name)


class Score(BaseModel):
    model_config = ConfigDict(frozen=True)

    notes: tuple[Note, ...]
    tempo: float = Field(gt=0, allow_inf_nan=False)
    time_signature: tuple[int, int] = (4, 4)

    @model_validator(mode='after')
    def _has_notes(self):
        if not self.notes:
            raise ValueError('a score needs at least one note')
        beats, unit = self.time_signature
        if beats < 1 or unit < 1:
            raise ValueError('time signature entries must be positive')
        return self

    @property
    def beat_unit(self) -> int:
        return self.time_signature[1]

    def to_json(self) -> str:
        payload = {
            'tempo': self.tempo,
            'time_signature': list(self.time_signature),
            'notes': [
                {'syllable': n.syllable, 'phonemes': list(n.phonemes), 'note': n.note_name, 'value': str(n.value)}
                for n in self.notes
            ],
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)


def parse_score(text: str) -> Score:
    try:
        return Score.model_validate_json(text)
    except ValidationError as exc:
        raise ScoreParseError(str(exc)) from exc


def load_score(path: str | Path) -> Score:
    return parse_score(Path(path).read_text(encoding='utf-8'))


def transpose_score(score: Score, semitones: int) -> Score:
    """Shift every pitched note by ``semitones``; rests are untouched."""
    notes = []
    for note in score.notes:
        if note.is_rest or semitones == 0:
            notes.append(note)
            continue
        midi = note.pitch_id + semitones
        if not 0 <= midi <= 127:
            raise PitchRangeError(f'{note.note_name} shifted by {semitones} leaves the MIDI range')
        notes.append(note.model_copy(update={'note_name': midi_to_note_name(midi)}))
    return score.model_copy(update={'notes': tuple(notes)})


_SHARP_NAMES = ['C', 'C#', 'D', 'D#', 'E', 'F', 'F#', 'G', 'G#', 'A', 'A#', 'B']


def midi_to_note_name(midi: int) -> str:
    if not 0 <= midi <= 127:
        raise PitchRangeError(f'pitch ID {midi} outside 0..127')
    return f'{_SHARP_NAMES[midi % 12]}{midi // 12 - 1}'


# === LEXICON ===

class PhonemeLexicon:
    """Syllable to phoneme mapping plus the phoneme ID inventory.

    ID 0 is padding and ID 1 is silence; the remaining IDs follow the sorted
    phoneme symbols so the same lexicon always yields the same IDs.
    """

    def __init__(self, entries: dict[str, list[str]]):
        empty = [syllable for syllable, phonemes in entries.items() if not phonemes]
        if empty:
            raise DomainError(f"lexicon entries without phonemes: {', '.join(empty)}")
        self.entries = {syllable: tuple(phonemes) for syllable, phonemes in entries.items()}
        symbols = sorted({p for phonemes in self.entries.values() for p in phonemes} - {SILENCE_PHONEME})
        self.symbols = [PAD_PHONEME, SILENCE_PHONEME] + symbols
        self._ids = {symbol: index for index, symbol in enumerate(self.symbols)}

    def __len__(self):
        return len(self.symbols)

    def phoneme_id(self, symbol: str) -> int:
        try:
            return self._ids[symbol]
        except KeyError:
            raise LexiconMissError([symbol]) from None

    def resolve(self, note: Note) -> tuple[str, ...]:
        if note.is_rest:
            return (SILENCE_PHONEME,)
        if note.syllable in self.entries:
            return self.entries[note.syllable]
        if note.phonemes and all(p in self._ids for p in note.phonemes):
            return note.phonemes
        raise LexiconMissError([note.syllable])

    def to_json(self) -> str:
        return json.dumps({k: list(v) for k, v in self.entries.items()}, ensure_ascii=False, indent=2)

    @classmethod
    def load(cls, path: str | Path) -> 'PhonemeLexicon':
        return cls(json.loads(Path(path).read_text(encoding='utf-8')))


# === ENCODING ===

@dataclass(frozen=True)
class ScoreSequence:
    phoneme_ids: np.ndarray
    pitch_ids: np.ndarray
    duration_frames: np.ndarray

    def __post_init__(self):
        n = len(self.phoneme_ids)
        if len(self.pitch_ids) != n or len(self.duration_frames) != n:
            raise DomainError('phoneme, pitch and duration sequences differ in length')
        if n and (self.pitch_ids.min() < 0 or self.pitch_ids.max() > REST_PITCH_ID):
            raise PitchRangeError('pitch IDs must lie in 0..128')
        if n and self.duration_frames.min() < 1:
            raise DomainError('duration frames must be at least 1')

    def __len__(self):
        return len(self.phoneme_ids)


def encode_score(score: Score, lexicon: PhonemeLexicon, hop: float) -> ScoreSequence:
    """Expand each note into one (phoneme, pitch, duration) triple per phoneme."""
    if not score.notes:
        raise DomainError('cannot encode an empty score')
    missing = []
    phonemes, pitches, durations = [], [], []
    for note in score.notes:
        try:
            symbols = lexicon.resolve(note)
        except LexiconMissError as exc:
            missing.extend(s for s in exc.syllables if s not in missing)
            continue
        frames = quantize_duration(note.value, score.tempo, score.beat_unit, hop)
        for symbol in symbols:
            phonemes.append(lexicon.phoneme_id(symbol))
            pitches.append(note.pitch_id)
            durations.append(frames)
    if missing:
        raise LexiconMissError(missing)
    return ScoreSequence(
        phoneme_ids=np.asarray(phonemes, dtype=np.int64),
        pitch_ids=np.asarray(pitches, dtype=np.int64),
        duration_frames=np.asarray(durations, dtype=np.int64),
    )
