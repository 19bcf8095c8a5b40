"""
CORPUS.PY - Synthetic singing corpus

Random scores are rendered by additive harmonic synthesis so that phoneme
durations, F0 and V/UV are known exactly. Vowels and voiced consonants are
harmonic with a formant-shaped amplitude profile per phoneme; unvoiced
consonants are high-passed noise; rests are digital silence.

Each utterance draws from its own RNG stream derived from (seed, index), so
a corpus is reproducible bit for bit and utterances can be rendered in any
order.
"""

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal
from tqdm import tqdm

from .config import FeatureConfig, SyntheticCorpusSpec
from .exceptions import DataError, DomainError
from .features import Waveform, write_wav
from .score import (
    SILENCE_PHONEME, Note, PhonemeLexicon, Score, ScoreSequence, encode_score, midi_to_note_name,
    quantize_duration, semitone_to_hz,
)

logger = logging.getLogger(__name__)

VOWELS = ('a', 'e', 'i', 'o', 'u')
VOICED_CONSONANTS = ('m', 'n', 'l')
UNVOICED_CONSONANTS = ('k', 's', 't', 'p', 'h', 'f')
CLUSTERS = (('s', 'k'), ('s', 't'), ('p', 'l'), ('k', 'l'), ('f', 'l'), ('s', 'm'), ('s', 'n'))

# First two formants (Hz) of each harmonic phoneme.
FORMANTS = {
    'a': (800.0, 1200.0), 'e': (500.0, 1900.0), 'i': (300.0, 2300.0),
    'o': (500.0, 900.0), 'u': (320.0, 800.0),
    'm': (250.0, 1000.0), 'n': (250.0, 1500.0), 'l': (350.0, 1200.0),
}
NOISE_CUTOFFS = {'k': 1500.0, 's': 4000.0, 't': 2500.0, 'p': 800.0, 'h': 1000.0, 'f': 3000.0}

CONSONANT_FRAMES = (8, 16)
FADE_S = 0.005


def default_lexicon() -> PhonemeLexicon:
    """Syllables of up to two consonants followed by a vowel, named by their letters."""
    entries = {}
    for vowel in VOWELS:
        entries[vowel] = [vowel]
        for consonant in VOICED_CONSONANTS + UNVOICED_CONSONANTS:
            entries[consonant + vowel] = [consonant, vowel]
        for first, second in CLUSTERS:
            entries[first + second + vowel] = [first, second, vowel]
    return PhonemeLexicon(entries)


def source_kind(phoneme: str) -> str:
    if phoneme == SILENCE_PHONEME:
        return 'silence'
    if phoneme in NOISE_CUTOFFS:
        return 'noise'
    if phoneme in FORMANTS:
        return 'harmonic'
    raise DomainError(f'no synthesis recipe for phoneme {phoneme!r}')


@dataclass(frozen=True)
class CorpusUtterance:
    name: str
    score: Score
    sequence: ScoreSequence
    durations: np.ndarray   # true frames per phoneme
    waveform: Waveform
    f0: np.ndarray          # analytic F0 at frame centres, 0 when unvoiced
    vuv: np.ndarray

    @property
    def n_frames(self) -> int:
        return int(self.durations.sum())

    def save_truth(self, path: str | Path) -> None:
        np.savez(
            path, durations=self.durations, f0=self.f0, vuv=self.vuv,
            phoneme_ids=self.sequence.phoneme_ids, pitch_ids=self.sequence.pitch_ids,
            duration_ids=self.sequence.duration_frames,
        )


def load_truth(path: str | Path) -> dict[str, np.ndarray]:
    with np.load(path) as data:
        return {key: data[key] for key in data.files}


# === TIMING ===

def split_note_frames(frames: int, phonemes: tuple[str, ...], rng: np.random.Generator) -> list[int]:
    """Give each leading consonant 8-16 frames while the final phoneme keeps at least half the note."""
    if frames < len(phonemes):
        raise DomainError(f'{frames} frames cannot hold {len(phonemes)} phonemes')
    n_consonants = len(phonemes) - 1
    if n_consonants == 0:
        return [frames]
    budget = frames // 2 // n_consonants
    lengths = [max(1, min(int(rng.integers(CONSONANT_FRAMES[0], CONSONANT_FRAMES[1] + 1)), budget))
               for _ in range(n_consonants)]
    return lengths + [frames - sum(lengths)]


# === RENDERING ===

def harmonic_profile(phoneme: str, f0: float, n_harmonics: int) -> np.ndarray:
    """Harmonic amplitudes: a strong fundamental plus two Gaussian formant bumps and a 1/h tilt."""
    first, second = FORMANTS[phoneme]
    harmonics = np.arange(1, n_harmonics + 1)
    freqs = harmonics * f0
    bumps = np.exp(-0.5 * ((freqs - first) / 150.0) ** 2) + 0.6 * np.exp(-0.5 * ((freqs - second) / 250.0) ** 2)
    profile = (0.15 + bumps) / harmonics
    profile[0] = 1.0
    if phoneme in VOICED_CONSONANTS:
        profile[1:] *= 0.3
    return profile


def _fade(segment: np.ndarray, fade: int, head: bool, tail: bool) -> np.ndarray:
    fade = min(fade, len(segment) // 2)
    if fade < 1:
        return segment
    ramp = np.sin(0.5 * np.pi * (np.arange(fade) + 0.5) / fade) ** 2
    if head:
        segment[:fade] *= ramp
    if tail:
        segment[-fade:] *= ramp[::-1]
    return segment


def render(score: Score, lexicon: PhonemeLexicon, spec: SyntheticCorpusSpec, feature: FeatureConfig,
           rng: np.random.Generator, name: str = 'utt') -> CorpusUtterance:
    """Render ``score`` and return it with its analytic annotations."""
    sr, hop = feature.sample_rate, feature.hop_samples
    sequence = encode_score(score, lexicon, feature.hop_s)

    phonemes, pitches, durations = [], [], []
    for note in score.notes:
        symbols = lexicon.resolve(note)
        frames = quantize_duration(note.value, score.tempo, score.beat_unit, feature.hop_s)
        for symbol, length in zip(symbols, split_note_frames(frames, symbols, rng)):
            phonemes.append(symbol)
            pitches.append(note.pitch_id)
            durations.append(length)
    durations = np.asarray(durations, dtype=np.int64)
    bounds = np.concatenate([[0], np.cumsum(durations)]) * hop
    n_samples = int(bounds[-1])

    kinds = [source_kind(p) for p in phonemes]
    t = np.arange(n_samples) / sr
    vibrato = spec.vibrato_depth * np.sin(2 * np.pi * spec.vibrato_rate * t)
    f0_samples = np.zeros(n_samples)
    for i, kind in enumerate(kinds):
        if kind == 'harmonic':
            lo, hi = bounds[i], bounds[i + 1]
            f0_samples[lo:hi] = semitone_to_hz(pitches[i] + vibrato[lo:hi])
    phase = 2 * np.pi * np.cumsum(f0_samples) / sr

    out = np.zeros(n_samples)
    fade = round(FADE_S * sr)
    for i, (phoneme, kind) in enumerate(zip(phonemes, kinds)):
        lo, hi = bounds[i], bounds[i + 1]
        if kind == 'silence':
            continue
        if kind == 'harmonic':
            profile = harmonic_profile(phoneme, semitone_to_hz(pitches[i]), spec.n_harmonics)
            k = np.arange(1, spec.n_harmonics + 1)
            audible = f0_samples[lo:hi, None] * k[None, :] < 0.45 * sr
            segment = (np.sin(phase[lo:hi, None] * k[None, :]) * profile * audible).sum(axis=1)
            segment *= spec.amplitude / profile.sum()
        else:
            sos = signal.butter(4, NOISE_CUTOFFS[phoneme], btype='highpass', fs=sr, output='sos')
            segment = signal.sosfilt(sos, rng.standard_normal(hi - lo))
            segment *= 0.3 * spec.amplitude / max(np.abs(segment).max(), 1e-12)
        head = i == 0 or kinds[i - 1] != kind
        tail = i == len(kinds) - 1 or kinds[i + 1] != kind
        out[lo:hi] = _fade(segment, fade, head, tail)

    centres = np.arange(int(durations.sum())) * hop
    f0 = f0_samples[centres]
    vuv = (f0 > 0).astype(np.int64)
    if int(sequence.duration_frames.size) != len(durations):
        raise DataError(f'{name}: encoded score and rendered phonemes disagree')
    return CorpusUtterance(
        name=name, score=score, sequence=sequence, durations=durations,
        waveform=Waveform(np.clip(out, -1.0, 1.0), sr), f0=f0, vuv=vuv,
    )


# === RANDOM SCORES ===

def random_score(spec: SyntheticCorpusSpec, lexicon: PhonemeLexicon, rng: np.random.Generator) -> Score:
    by_length: dict[int, list[str]] = {}
    for syllable, symbols in sorted(lexicon.entries.items()):
        by_length.setdefault(len(symbols), []).append(syllable)
    lo_ph, hi_ph = spec.phonemes_per_note
    choices = [n for n in range(lo_ph, hi_ph + 1) if n in by_length]
    if not choices:
        raise DomainError(f'lexicon has no syllables with {lo_ph}-{hi_ph} phonemes')

    rest = {'syllable': SILENCE_PHONEME, 'note': 'rest', 'value': spec.edge_rest_value}
    notes = [rest]
    n_notes = int(rng.integers(spec.notes_per_utterance[0], spec.notes_per_utterance[1] + 1))
    for index in range(n_notes):
        value = spec.note_values[int(rng.integers(len(spec.note_values)))]
        if 0 < index < n_notes - 1 and rng.random() < spec.rest_probability:
            notes.append({**rest, 'value': value})
            continue
        syllables = by_length[choices[int(rng.integers(len(choices)))]]
        midi = int(rng.integers(spec.pitch_range[0], spec.pitch_range[1] + 1))
        notes.append({'syllable': syllables[int(rng.integers(len(syllables)))],
                      'note': midi_to_note_name(midi), 'value': value})
    notes.append(rest)
    tempo = round(float(rng.uniform(*spec.tempo_range)), 1)
    return Score.model_validate({'notes': notes, 'tempo': tempo})


def utterance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def generate_corpus(spec: SyntheticCorpusSpec, feature: FeatureConfig,
                    lexicon: PhonemeLexicon | None = None, progress: bool = False) -> list[CorpusUtterance]:
    lexicon = lexicon or default_lexicon()
    utterances = []
    for index in tqdm(range(spec.n_utterances), desc='corpus', disable=not progress):
        rng = utterance_rng(spec.seed, index)
        score = random_score(spec, lexicon, rng)
        utterances.append(render(score, lexicon, spec, feature, rng, name=f'utt{index:04d}'))
    logger.info('generated %d synthetic utterances (seed %d)', len(utterances), spec.seed)
    return utterances


def write_corpus(utterances: list[CorpusUtterance], out_dir: str | Path, lexicon: PhonemeLexicon,
                 spec: SyntheticCorpusSpec, feature: FeatureConfig) -> Path:
    """Lay out lexicon.json, spec.json, scores/, wavs/ and truth/ under ``out_dir``."""
    out = Path(out_dir)
    for sub in ('scores', 'wavs', 'truth'):
        (out / sub).mkdir(parents=True, exist_ok=True)
    (out / 'lexicon.json').write_text(lexicon.to_json(), encoding='utf-8')
    (out / 'spec.json').write_text(
        json.dumps({'corpus': spec.model_dump(mode='json'), 'feature': feature.model_dump(mode='json')}, indent=2),
        encoding='utf-8',
    )
    for utt in utterances:
        (out / 'scores' / f'{utt.name}.json').write_text(utt.score.to_json(), encoding='utf-8')
        write_wav(out / 'wavs' / f'{utt.name}.wav', utt.waveform)
        utt.save_truth(out / 'truth' / f'{utt.name}.npz')
    return out


def corpus_duration(utterances: list[CorpusUtterance]) -> float:
    return math.fsum(u.waveform.duration for u in utterances)


def single_note_score(note: str, value: str | Fraction, tempo: float, syllable: str = 'a') -> Score:
    return Score(notes=(Note(syllable=syllable, note=note, value=value),), tempo=tempo)
