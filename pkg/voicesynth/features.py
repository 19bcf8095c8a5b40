"""
FEATURES.PY - Waveform analysis and feature normalization

Extracts the frame-level acoustic features the acoustic model predicts and
the vocoder consumes: log-mel spectrogram, F0 in Hz and the voiced/unvoiced
flag. All three share one framing: frame t is centred on sample t * hop, so a
waveform of n samples yields ceil(n / hop) frames.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

import librosa
import numpy as np
import soundfile

from .exceptions import ContractError, DataError, DomainError, FrameError, StatsError
from .score import hz_to_semitone, semitone_to_hz

logger = logging.getLogger(__name__)

MEL_FLOOR = 1e-5


# === WAVEFORMS ===

@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = 48000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise FrameError('waveforms are mono; expected a 1-D sample array')
        if self.sample_rate <= 0:
            raise FrameError('sample_rate must be positive')
        if not np.all(np.isfinite(samples)):
            raise FrameError('waveform contains NaN or Inf samples')
        if samples.size and np.abs(samples).max() > 1.0:
            raise FrameError('waveform samples must lie in [-1, 1]')
        object.__setattr__(self, 'samples', samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def reversed(self) -> 'Waveform':
        return Waveform(self.samples[::-1].copy(), self.sample_rate)


def read_wav(path: str | Path, sample_rate: int = 48000) -> Waveform:
    """Read a mono WAV file; a rate other than ``sample_rate`` is an error (no resampling)."""
    samples, rate = soundfile.read(str(path), dtype='float64', always_2d=False)
    if rate != sample_rate:
        raise FrameError(f'{path}: sample rate {rate} Hz, expected {sample_rate} Hz')
    if samples.ndim != 1:
        raise FrameError(f'{path}: expected mono audio, got {samples.shape[1]} channels')
    return Waveform(samples, rate)


def write_wav(path: str | Path, waveform: Waveform) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    soundfile.write(str(path), np.clip(waveform.samples, -1.0, 1.0), waveform.sample_rate, subtype='PCM_16')


def frame_count(n_samples: int, hop_samples: int) -> int:
    """Frames produced by centre-padded framing of ``n_samples``."""
    return -(-n_samples // hop_samples)


def seconds_to_samples(seconds: float, sample_rate: int) -> int:
    samples = seconds * sample_rate
    if abs(samples - round(samples)) > 1e-6:
        raise FrameError(f'{seconds} s is not a whole number of samples at {sample_rate} Hz')
    return round(samples)


# === MEL SPECTROGRAM ===

def mel_center_frequencies(n_mels: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    return librosa.mel_frequencies(n_mels + 2, fmin=fmin, fmax=fmax or sample_rate / 2)[1:-1]


def mel_spectrogram(
    w: Waveform,
    window: float = 0.020,
    hop: float = 0.005,
    n_mels: int = 80,
    fmin: float = 0.0,
    fmax: float | None = None,
) -> np.ndarray:
    """Natural-log mel energies, shape (T, n_mels), floored at 1e-5."""
    win_samples = seconds_to_samples(window, w.sample_rate)
    hop_samples = seconds_to_samples(hop, w.sample_rate)
    if len(w) <= win_samples:
        raise FrameError(f'waveform of {len(w)} samples is not longer than one window ({win_samples})')
    spectrum = librosa.stft(
        w.samples,
        n_fft=win_samples,
        hop_length=hop_samples,
        win_length=win_samples,
        window='hann',
        center=True,
        pad_mode='reflect',
    )
    power = np.abs(spectrum) ** 2
    basis = librosa.filters.mel(sr=w.sample_rate, n_fft=win_samples, n_mels=n_mels, fmin=fmin, fmax=fmax)
    energies = basis @ power
    frames = frame_count(len(w), hop_samples)
    return np.log(np.maximum(energies[:, :frames], MEL_FLOOR)).T


# === F0 ===

class F0Tracker(Protocol):
    def __call__(self, w: Waveform, hop_samples: int, fmin: float, fmax: float) -> np.ndarray:
        """Per-frame F0 in Hz, 0 where unvoiced, ceil(len(w) / hop_samples) frames."""


class AutocorrelationTracker:
    """Normalized-autocorrelation pitch tracker.

    Each frame spans two periods of ``fmin``. The pitch period is the first
    local maximum of the normalized autocorrelation that reaches 90% of the
    best peak in the allowed lag range, refined by parabolic interpolation.
    """

    def __init__(self, voicing_threshold: float = 0.6, silence_rms: float = 1e-4, chunk_frames: int = 512):
        self.voicing_threshold = voicing_threshold
        self.silence_rms = silence_rms
        self.chunk_frames = chunk_frames

    def __call__(self, w: Waveform, hop_samples: int, fmin: float, fmax: float) -> np.ndarray:
        sr = w.sample_rate
        frame_len = int(math.ceil(2 * sr / fmin))
        lag_min = max(2, int(math.floor(sr / fmax)))
        lag_max = int(math.ceil(sr / fmin))
        frame_len = max(frame_len, lag_max + 2)
        n_frames = frame_count(len(w), hop_samples)
        half = frame_len // 2
        padded = np.pad(w.samples, (half, frame_len - half + hop_samples))
        frames = librosa.util.frame(padded, frame_length=frame_len, hop_length=hop_samples, axis=0)[:n_frames]

        f0 = np.zeros(n_frames)
        for start in range(0, n_frames, self.chunk_frames):
            block = frames[start:start + self.chunk_frames]
            f0[start:start + len(block)] = self._track_block(block, sr, lag_min, lag_max)
        return f0

    def _track_block(self, frames, sr, lag_min, lag_max):
        frame_len = frames.shape[1]
        n_fft = 1 << (2 * frame_len - 1).bit_length()
        spectrum = np.fft.rfft(frames, n_fft, axis=1)
        acf = np.fft.irfft(np.abs(spectrum) ** 2, n_fft, axis=1)[:, :lag_max + 2]
        cumulative = np.concatenate([np.zeros((len(frames), 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
        lags = np.arange(lag_max + 2)
        head = cumulative[:, frame_len - lags]
        tail = cumulative[:, -1:] - cumulative[:, lags]
        nccf = acf / np.sqrt(head * tail + 1e-20)

        rms = np.sqrt(cumulative[:, -1] / frame_len)
        f0 = np.zeros(len(frames))
        for i, curve in enumerate(nccf):
            if rms[i] < self.silence_rms:
                continue
            window = curve[lag_min:lag_max + 1]
            best = window.max()
            if best < self.voicing_threshold:
                continue
            peaks = np.flatnonzero(
                (window[1:-1] >= window[:-2]) & (window[1:-1] > window[2:]) & (window[1:-1] >= 0.9 * best)
            )
            if not peaks.size:
                # best lag sits on the window edge: no period in range
                continue
            lag = lag_min + 1 + peaks[0]
            a, b, c = curve[lag - 1], curve[lag], curve[lag + 1]
            denom = a - 2 * b + c
            shift = float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5)) if denom < 0 else 0.0
            f0[i] = sr / (lag + shift)
        return f0


class PyinTracker:
    """Probabilistic YIN from librosa; slower, with its own voicing decision."""

    def __call__(self, w: Waveform, hop_samples: int, fmin: float, fmax: float) -> np.ndarray:
        frame_length = 1 << int(math.ceil(math.log2(2 * w.sample_rate / fmin)))
        f0, voiced, _ = librosa.pyin(
            w.samples, fmin=fmin, fmax=fmax, sr=w.sample_rate,
            frame_length=frame_length, hop_length=hop_samples, center=True,
        )
        f0 = np.where(voiced, np.nan_to_num(f0), 0.0)
        return f0[:frame_count(len(w), hop_samples)]


TRACKERS = {'acf': AutocorrelationTracker, 'pyin': PyinTracker}


def extract_f0(
    w: Waveform,
    fmin: float = 60.0,
    fmax: float = 1600.0,
    hop: float = 0.005,
    tracker: F0Tracker | None = None,
) -> np.ndarray:
    if not fmin < fmax < w.sample_rate / 2:
        raise DomainError('need fmin < fmax < sample_rate / 2')
    tracker = tracker or AutocorrelationTracker()
    return tracker(w, seconds_to_samples(hop, w.sample_rate), fmin, fmax)


def vuv_from_f0(f0: np.ndarray, threshold: float = 3.0) -> np.ndarray:
    """1 where F0 exceeds ``threshold`` Hz, else 0."""
    f0 = np.asarray(f0, dtype=np.float64)
    if np.any(f0 < 0):
        raise DomainError('F0 values must be non-negative')
    return (f0 > threshold).astype(np.int64)


# === FEATURE RECORDS ===

@dataclass(frozen=True)
class AcousticFeatures:
    """Per-frame mel, F0 and V/UV.

    Unnormalized: mel in log energy, f0 in Hz (0 when unvoiced).
    Normalized: mel z-scored per bin, f0 as z-scored semitones on voiced
    frames and 0 elsewhere.
    """

    mel: np.ndarray
    f0: np.ndarray
    vuv: np.ndarray
    hop: float = 0.005
    window: float = 0.020
    normalized: bool = False

    def __post_init__(self):
        frames = {len(self.mel), len(self.f0), len(self.vuv)}
        if len(frames) != 1:
            raise ContractError(f'mel, f0 and vuv disagree on frame count: {sorted(frames)}')
        if not math.isclose(self.window, 4 * self.hop, rel_tol=1e-9):
            raise FrameError('window must be 4 times the hop')

    @property
    def n_frames(self) -> int:
        return len(self.mel)

    def truncate(self, frames: int) -> 'AcousticFeatures':
        return replace(self, mel=self.mel[:frames], f0=self.f0[:frames], vuv=self.vuv[:frames])


def extract_features(w: Waveform, config, tracker: F0Tracker | None = None) -> AcousticFeatures:
    """Mel, F0 and V/UV for ``w`` using a FeatureConfig."""
    if w.sample_rate != config.sample_rate:
        raise FrameError(f'waveform is {w.sample_rate} Hz, config expects {config.sample_rate} Hz')
    mel = mel_spectrogram(w, config.window_s, config.hop_s, config.n_mels, config.mel_fmin, config.mel_fmax)
    tracker = tracker or TRACKERS[config.f0_tracker]()
    f0 = extract_f0(w, config.f0_min, config.f0_max, config.hop_s, tracker)
    vuv = vuv_from_f0(f0, config.vuv_threshold)
    logger.debug('extracted %d frames (%d voiced) with the %s tracker', len(mel), int(vuv.sum()), config.f0_tracker)
    return AcousticFeatures(mel=mel, f0=np.where(vuv > 0, f0, 0.0), vuv=vuv, hop=config.hop_s, window=config.window_s)


# === NORMALIZATION ===

@dataclass(frozen=True)
class NormStats:
    mel_mean: np.ndarray
    mel_std: np.ndarray
    f0_mean: float
    f0_std: float

    def __post_init__(self):
        if np.any(np.asarray(self.mel_std) <= 0) or not self.f0_std > 0:
            raise StatsError('normalization std entries must be strictly positive')

    def to_dict(self) -> dict:
        return {
            'mel_mean': np.asarray(self.mel_mean).tolist(),
            'mel_std': np.asarray(self.mel_std).tolist(),
            'f0_mean': float(self.f0_mean),
            'f0_std': float(self.f0_std),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'NormStats':
        return cls(
            mel_mean=np.asarray(data['mel_mean'], dtype=np.float64),
            mel_std=np.asarray(data['mel_std'], dtype=np.float64),
            f0_mean=float(data['f0_mean']),
            f0_std=float(data['f0_std']),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding='utf-8')

    @classmethod
    def load(cls, path: str | Path) -> 'NormStats':
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


@dataclass
class _Moments:
    """Shifted running sums; shifting by the first value keeps constant data at exactly zero variance."""

    shift: np.ndarray | None = None
    count: int = 0
    total: np.ndarray | float = 0.0
    squares: np.ndarray | float = 0.0

    def add(self, values: np.ndarray) -> None:
        if not len(values):
            return
        if self.shift is None:
            self.shift = np.array(values[0], dtype=np.float64)
        centred = np.asarray(values, dtype=np.float64) - self.shift
        self.count += len(values)
        self.total = self.total + centred.sum(axis=0)
        self.squares = self.squares + (centred ** 2).sum(axis=0)

    def mean_std(self):
        mean = self.total / self.count
        variance = np.maximum(self.squares / self.count - mean ** 2, 0.0)
        return mean + self.shift, np.sqrt(variance)


def compute_norm_stats(features) -> NormStats:
    """Per-bin mel statistics and voiced-frame semitone F0 statistics in one pass."""
    mel, f0 = _Moments(), _Moments()
    for feats in features:
        if feats.normalized:
            raise StatsError('statistics must be computed on unnormalized features')
        mel.add(feats.mel)
        voiced = feats.f0[feats.vuv > 0]
        f0.add(hz_to_semitone(voiced) if voiced.size else voiced)
    if mel.count == 0:
        raise StatsError('no frames to compute statistics from')
    if f0.count == 0:
        raise StatsError('no voiced frames to compute F0 statistics from')
    mel_mean, mel_std = mel.mean_std()
    f0_mean, f0_std = f0.mean_std()
    flat = np.flatnonzero(mel_std <= 1e-12)
    if flat.size:
        raise StatsError(f'mel bins with zero variance: {flat.tolist()}')
    if f0_std <= 1e-12:
        raise StatsError('voiced F0 has zero variance')
    return NormStats(mel_mean=mel_mean, mel_std=mel_std, f0_mean=float(f0_mean), f0_std=float(f0_std))


def normalize(feats: AcousticFeatures, stats: NormStats) -> AcousticFeatures:
    if feats.normalized:
        return feats
    voiced = feats.vuv > 0
    f0 = np.zeros(feats.n_frames)
    if voiced.any():
        f0[voiced] = (hz_to_semitone(feats.f0[voiced]) - stats.f0_mean) / stats.f0_std
    mel = (feats.mel - stats.mel_mean) / stats.mel_std
    return replace(feats, mel=mel, f0=f0, normalized=True)


def denormalize(feats: AcousticFeatures, stats: NormStats) -> AcousticFeatures:
    if not feats.normalized:
        return feats
    voiced = feats.vuv > 0
    f0 = np.zeros(feats.n_frames)
    if voiced.any():
        f0[voiced] = semitone_to_hz(feats.f0[voiced] * stats.f0_std + stats.f0_mean)
    mel = feats.mel * stats.mel_std + stats.mel_mean
    return replace(feats, mel=mel, f0=f0, normalized=False)


# === FEATURE CACHE ===

@dataclass
class FeatureRecord:
    """One cached utterance: score encoding, true phoneme durations and raw features."""

    name: str
    phoneme_ids: np.ndarray
    pitch_ids: np.ndarray
    duration_ids: np.ndarray
    durations: np.ndarray
    features: AcousticFeatures
    extra: dict = field(default_factory=dict)

    def check_alignment(self) -> None:
        lengths = {len(self.phoneme_ids), len(self.pitch_ids), len(self.duration_ids), len(self.durations)}
        if len(lengths) != 1:
            raise DataError(f'{self.name}: score sequences disagree on length')
        if int(np.sum(self.durations)) != self.features.n_frames:
            raise DataError(
                f'{self.name}: durations sum to {int(np.sum(self.durations))} frames '
                f'but features have {self.features.n_frames}'
            )

    def save(self, path: str | Path) -> None:
        feats = self.features
        np.savez(
            path,
            phoneme_ids=self.phoneme_ids, pitch_ids=self.pitch_ids,
            duration_ids=self.duration_ids, durations=self.durations,
            mel=feats.mel.astype(np.float32), f0=feats.f0.astype(np.float32), vuv=feats.vuv.astype(np.int8),
            T=feats.n_frames, hop=feats.hop, window=feats.window,
        )

    @classmethod
    def load(cls, path: str | Path) -> 'FeatureRecord':
        path = Path(path)
        with np.load(path) as data:
            feats = AcousticFeatures(
                mel=data['mel'].astype(np.float64), f0=data['f0'].astype(np.float64),
                vuv=data['vuv'].astype(np.int64), hop=float(data['hop']), window=float(data['window']),
            )
            record = cls(
                name=path.stem, phoneme_ids=data['phoneme_ids'], pitch_ids=data['pitch_ids'],
                duration_ids=data['duration_ids'], durations=data['durations'], features=feats,
            )
        record.check_alignment()
        return record
