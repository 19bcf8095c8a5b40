"""
CONFIG.PY - Validated hyperparameter records

Every architecture and training hyperparameter is a frozen pydantic model.
Two profiles are provided: ``full`` (the full-size 48 kHz system) and ``tiny``
(desk-scale, for CI and overfit checks). A JSON config file names a profile
and overrides any subset of its sections.
"""

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import SpecError


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


# === FEATURES ===

class FeatureConfig(FrozenModel):
    """Framing and analysis parameters shared by every stage."""

    sample_rate: int = Field(48000, gt=0)
    window_s: float = Field(0.020, gt=0)
    hop_s: float = Field(0.005, gt=0)
    n_mels: int = Field(80, ge=1)
    mel_fmin: float = Field(0.0, ge=0)
    mel_fmax: float | None = None
    f0_min: float = Field(60.0, gt=0)
    f0_max: float = Field(1600.0, gt=0)
    vuv_threshold: float = Field(3.0, ge=0)
    f0_tracker: Literal['acf', 'pyin'] = 'acf'

    @model_validator(mode='after')
    def _check_framing(self):
        if not math.isclose(self.window_s, 4 * self.hop_s, rel_tol=1e-9):
            raise ValueError('window must be 4 times the hop')
        for name, seconds in (('hop', self.hop_s), ('window', self.window_s)):
            samples = seconds * self.sample_rate
            if abs(samples - round(samples)) > 1e-6:
                raise ValueError(f'{name} of {seconds} s is not a whole number of samples')
        if not self.f0_min < self.f0_max < self.sample_rate / 2:
            raise ValueError('need f0_min < f0_max < sample_rate / 2')
        return self

    @property
    def hop_samples(self) -> int:
        return round(self.hop_s * self.sample_rate)

    @property
    def window_samples(self) -> int:
        return round(self.window_s * self.sample_rate)


# Window/hop presets from the framing study; the ratio is always 4:1.
FRAMING_PRESETS = {
    '20/5': {'window_s': 0.020, 'hop_s': 0.005},
    '12/3': {'window_s': 0.012, 'hop_s': 0.003},
    '50/12.5': {'window_s': 0.050, 'hop_s': 0.0125},
}


# === ACOUSTIC MODEL ===

class AcousticModelConfig(FrozenModel):
    n_phonemes: int = Field(128, ge=2)
    n_pitch_ids: int = Field(129, ge=129)
    max_duration_frames: int = Field(1000, ge=1)
    n_encoder_blocks: int = Field(6, ge=1)
    n_decoder_blocks: int = Field(6, ge=1)
    hidden: int = Field(384, ge=1)
    n_heads: int = Field(2, ge=1)
    conv_kernel: int = Field(3, ge=1)
    conv_filter: int = Field(1536, ge=1)
    dropout: float = Field(0.1, ge=0, lt=1)
    n_mels: int = Field(80, ge=1)
    duration_filter: int = Field(384, ge=1)
    duration_kernel: int = Field(3, ge=1)

    @model_validator(mode='after')
    def _heads_divide_hidden(self):
        if self.hidden % self.n_heads:
            raise ValueError('hidden must be divisible by n_heads')
        return self


# === SF-GAN ===

class SubBandSpec(FrozenModel):
    """Half-open mel-bin intervals, one discriminator per interval."""

    bands: tuple[tuple[int, int], ...] = ((0, 40), (20, 60), (40, 80))

    def validate_for(self, n_mels: int) -> 'SubBandSpec':
        """Raise SpecError unless the bands are ordered, overlapping and cover [0, n_mels)."""
        if not self.bands:
            return self
        for lo, hi in self.bands:
            if not 0 <= lo < hi <= n_mels:
                raise SpecError(f'band ({lo}, {hi}) outside [0, {n_mels})')
        if self.bands[0][0] != 0 or self.bands[-1][1] != n_mels:
            raise SpecError(f'bands {self.bands} do not cover [0, {n_mels})')
        for (lo_a, hi_a), (lo_b, hi_b) in zip(self.bands, self.bands[1:]):
            if not lo_a < lo_b < hi_a:
                raise SpecError(f'bands ({lo_a}, {hi_a}) and ({lo_b}, {hi_b}) do not overlap')
        return self

    @property
    def widths(self) -> list[int]:
        return [hi - lo for lo, hi in self.bands]


BAND_PRESETS = {
    0: SubBandSpec(bands=()),
    1: SubBandSpec(bands=((0, 80),)),
    3: SubBandSpec(),
    5: SubBandSpec(bands=((0, 26), (13, 39), (26, 52), (39, 65), (52, 80))),
}


class SFDiscriminatorConfig(FrozenModel):
    bands: SubBandSpec = SubBandSpec()
    n_conv_layers: int = Field(3, ge=1)
    # None: parameter-matched to the 3-band, 32-channel setting
    channels: int | None = Field(None, ge=1)
    kernel: int = Field(3, ge=1)
    stride: int = Field(2, ge=1)
    leaky_relu_slope: float = Field(0.2, ge=0)
    window_min_frames: int = Field(32, ge=1)
    window_max_frames: int = Field(96, ge=1)

    @field_validator('bands', mode='before')
    @classmethod
    def _bands_from_lists(cls, value):
        if isinstance(value, (list, tuple)):
            return {'bands': [tuple(band) for band in value]}
        return value

    @model_validator(mode='after')
    def _window_range(self):
        if self.window_min_frames > self.window_max_frames:
            raise ValueError('window_min_frames exceeds window_max_frames')
        return self

    @property
    def resolved_channels(self) -> int:
        if self.channels is not None:
            return self.channels
        return parameter_matched_channels(max(1, len(self.bands.bands)))


# === VOCODER ===

class VocoderConfig(FrozenModel):
    n_stacks: int = Field(3, ge=1)
    n_layers_per_stack: int = Field(10, ge=1)
    kernel: int = Field(13, ge=1)
    residual_channels: int = Field(64, ge=1)
    gate_channels: int = Field(128, ge=2)
    skip_channels: int = Field(64, ge=1)
    hop_samples: int = Field(240, ge=1)
    n_mels: int = Field(80, ge=1)
    use_f0: bool = True
    use_vuv: bool = True
    upsample_factors: tuple[int, ...] = (4, 4, 15)

    @model_validator(mode='after')
    def _check_shape(self):
        if self.kernel % 2 == 0:
            raise ValueError('kernel must be odd')
        if self.gate_channels % 2:
            raise ValueError('gate_channels must be even')
        if math.prod(self.upsample_factors) != self.hop_samples:
            raise ValueError('upsample_factors must multiply to hop_samples')
        return self

    @property
    def dilations(self) -> list[int]:
        return [2 ** i for i in range(self.n_layers_per_stack)]

    @property
    def aux_dims(self) -> int:
        return self.n_mels + int(self.use_f0) + int(self.use_vuv)


# === ML-GAN ===

class CropSpec(FrozenModel):
    lengths_s: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    sample_rate: int = Field(48000, gt=0)

    @model_validator(mode='after')
    def _ascending_whole_samples(self):
        if any(length <= 0 for length in self.lengths_s):
            raise ValueError('crop lengths must be positive')
        if list(self.lengths_s) != sorted(set(self.lengths_s)):
            raise ValueError('crop lengths must be strictly ascending')
        for length in self.lengths_s:
            samples = length * self.sample_rate
            if abs(samples - round(samples)) > 1e-6:
                raise ValueError(f'crop of {length} s is not a whole number of samples')
        return self

    @property
    def lengths_samples(self) -> list[int]:
        return [round(length * self.sample_rate) for length in self.lengths_s]


class MLDiscriminatorConfig(FrozenModel):
    crops: CropSpec = CropSpec()
    n_layers: int = Field(10, ge=1)
    kernel: int = Field(9, ge=1)
    channels: int = Field(64, ge=1)
    leaky_relu_slope: float = Field(0.2, ge=0)

    @property
    def dilations(self) -> list[int]:
        return list(range(1, self.n_layers + 1))


# === TRAINING ===

class AcousticTrainSpec(FrozenModel):
    kind: Literal['acoustic'] = 'acoustic'
    steps: int = Field(60000, ge=1)
    batch_size: int = Field(32, ge=1)
    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-9
    warmup_steps: int = Field(4000, ge=1)
    d_model: int = Field(384, ge=1)
    adv_start_step: int = Field(10000, ge=0)
    lambda_adv: float = 4.0
    f0_weight: float = 0.1
    vuv_weight: float = 0.1
    duration_weight: float = 1.0
    grad_clip: float = 1.0
    log_every: int = Field(100, ge=1)

    @model_validator(mode='after')
    def _gate_inside_run(self):
        if self.adv_start_step >= self.steps:
            raise ValueError('adv_start_step must be below steps')
        return self


class VocoderTrainSpec(FrozenModel):
    kind: Literal['vocoder'] = 'vocoder'
    steps: int = Field(400000, ge=1)
    batch_size: int = Field(4, ge=1)
    lr: float = Field(1e-4, gt=0)
    lr_decay: float = Field(0.5, gt=0)
    lr_decay_every: int = Field(200000, ge=1)
    adv_start_step: int = Field(100000, ge=0)
    lambda_adv: float = 4.0
    segment_frames: int = Field(240, ge=1)
    grad_clip: float = 1.0
    log_every: int = Field(100, ge=1)

    @model_validator(mode='after')
    def _gate_inside_run(self):
        if self.adv_start_step >= self.steps:
            raise ValueError('adv_start_step must be below steps')
        return self


# === SYNTHETIC CORPUS ===

class SyntheticCorpusSpec(FrozenModel):
    n_utterances: int = Field(8, ge=1)
    notes_per_utterance: tuple[int, int] = (3, 6)
    tempo_range: tuple[float, float] = (90.0, 140.0)
    pitch_range: tuple[int, int] = (55, 72)
    phonemes_per_note: tuple[int, int] = (1, 3)
    note_values: tuple[str, ...] = ('1/8', '1/4', '1/2')
    rest_probability: float = Field(0.15, ge=0, le=1)
    edge_rest_value: str = '1/8'
    n_harmonics: int = Field(16, ge=1)
    vibrato_depth: float = Field(0.25, ge=0)
    vibrato_rate: float = Field(5.5, ge=0)
    amplitude: float = Field(0.5, gt=0, le=1)
    seed: int = 0

    @field_validator('notes_per_utterance', 'tempo_range', 'pitch_range', 'phonemes_per_note')
    @classmethod
    def _range_not_empty(cls, value):
        if value[0] > value[1]:
            raise ValueError(f'empty range {value}')
        return value

    @field_validator('note_values')
    @classmethod
    def _fractions(cls, value):
        if not value:
            raise ValueError('note_values must not be empty')
        for text in value:
            if Fraction(text) <= 0:
                raise ValueError(f'note value {text} must be positive')
        return value

    @model_validator(mode='after')
    def _midi_range(self):
        lo, hi = self.pitch_range
        if lo < 0 or hi > 127:
            raise ValueError('pitch_range must lie in 0..127')
        if self.tempo_range[0] <= 0:
            raise ValueError('tempo must be positive')
        return self


# === PROFILES ===

class ExperimentConfig(FrozenModel):
    """Everything one experiment needs; built from a profile plus overrides."""

    profile: Literal['full', 'tiny'] = 'full'
    feature: FeatureConfig = FeatureConfig()
    acoustic: AcousticModelConfig = AcousticModelConfig()
    sf_discriminator: SFDiscriminatorConfig = SFDiscriminatorConfig()
    vocoder: VocoderConfig = VocoderConfig()
    ml_discriminator: MLDiscriminatorConfig = MLDiscriminatorConfig()
    acoustic_train: AcousticTrainSpec = AcousticTrainSpec()
    vocoder_train: VocoderTrainSpec = VocoderTrainSpec()
    corpus: SyntheticCorpusSpec = SyntheticCorpusSpec()

    @model_validator(mode='after')
    def _sections_agree(self):
        feature = self.feature
        if self.acoustic.n_mels != feature.n_mels or self.vocoder.n_mels != feature.n_mels:
            raise ValueError('n_mels differs between feature, acoustic and vocoder sections')
        if self.vocoder.hop_samples != feature.hop_samples:
            raise ValueError('vocoder hop_samples does not match the feature hop')
        if self.ml_discriminator.crops.sample_rate != feature.sample_rate:
            raise ValueError('crop sample rate does not match the feature sample rate')
        self.sf_discriminator.bands.validate_for(feature.n_mels)
        return self


PROFILES = {
    'full': {},
    'tiny': {
        'acoustic': {
            'n_encoder_blocks': 2, 'n_decoder_blocks': 2, 'hidden': 64, 'n_heads': 2,
            'conv_filter': 256, 'duration_filter': 64, 'dropout': 0.0,
        },
        'sf_discriminator': {'channels': 8, 'window_min_frames': 16, 'window_max_frames': 48},
        'vocoder': {
            'n_stacks': 2, 'n_layers_per_stack': 6, 'residual_channels': 16,
            'gate_channels': 32, 'skip_channels': 16,
        },
        'ml_discriminator': {'channels': 16},
        'acoustic_train': {
            'steps': 2000, 'batch_size': 4, 'warmup_steps': 400, 'd_model': 64,
            'adv_start_step': 100, 'log_every': 50,
        },
        'vocoder_train': {
            'steps': 5000, 'batch_size': 1, 'lr': 1e-3, 'lr_decay_every': 2500,
            'adv_start_step': 200, 'segment_frames': 100, 'log_every': 50,
        },
        'corpus': {'n_utterances': 4, 'notes_per_utterance': (3, 4)},
    },
}


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_config(profile: str = 'full', overrides: dict | None = None) -> ExperimentConfig:
    """Return the named profile with ``overrides`` merged section by section."""
    if profile not in PROFILES:
        raise SpecError(f'unknown profile {profile!r}; choose from {sorted(PROFILES)}')
    data = _merge(PROFILES[profile], overrides or {})
    data['profile'] = profile
    return ExperimentConfig.model_validate(data)


def load_config(path: str | Path | None = None, profile: str | None = None) -> ExperimentConfig:
    """Load a JSON config file; ``profile`` overrides the file's own profile key."""
    overrides = {}
    if path is not None:
        overrides = json.loads(Path(path).read_text(encoding='utf-8'))
    chosen = profile or overrides.pop('profile', 'full')
    overrides.pop('profile', None)
    return build_config(chosen, overrides)


def parameter_matched_channels(n_bands: int, reference_channels: int = 32, reference_bands: int = 3) -> int:
    """Channel width giving ``n_bands`` discriminators the parameter budget of the reference setting.

    Conv parameters grow with the square of the width, so width scales with
    sqrt(reference_bands / n_bands).
    """
    if n_bands < 1:
        raise SpecError('n_bands must be at least 1')
    return max(1, round(reference_channels * math.sqrt(reference_bands / n_bands)))
