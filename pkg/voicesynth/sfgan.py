"""
SFGAN.PY - Sub-frequency adversarial training for the acoustic model

The mel-spectrogram is split into overlapping bands of mel bins (low 0-40,
middle 20-60, high 40-80 by default). Each band has its own 2-D convolutional
discriminator that scores a randomly placed window of random length.
Discriminators share an architecture but never parameters.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .adversarial import lsgan_discriminator_loss, lsgan_generator_loss, uniform_int
from .config import SFDiscriminatorConfig, SubBandSpec
from .exceptions import ContractError


def split_subbands(mel, spec: SubBandSpec) -> list:
    """Column slices [lo, hi) of the last axis, one per band, in spec order."""
    spec.validate_for(mel.shape[-1])
    return [mel[..., lo:hi] for lo, hi in spec.bands]


def sample_window(mel, min_frames: int, max_frames: int, generator: torch.Generator):
    """Contiguous fragment of a (T, B) matrix, length uniform in [min, min(max, T)].

    Sequences shorter than ``min_frames`` are returned whole.
    """
    total = mel.shape[0]
    if total <= min_frames:
        return mel
    length = uniform_int(min_frames, min(max_frames, total), generator)
    start = uniform_int(0, total - length, generator)
    return mel[start:start + length]


def sample_window_batch(mel: torch.Tensor, lengths: torch.Tensor, min_frames: int, max_frames: int,
                        generator: torch.Generator) -> torch.Tensor:
    """One window length for the batch, an independent start per item; (B, L, bins)."""
    shortest = int(lengths.min())
    if shortest <= min_frames:
        length = shortest
    else:
        length = uniform_int(min_frames, min(max_frames, shortest), generator)
    windows = []
    for item, item_length in zip(mel, lengths.tolist()):
        start = uniform_int(0, item_length - length, generator)
        windows.append(item[start:start + length])
    return torch.stack(windows)


class SubBandDiscriminator(nn.Module):
    """Strided 2-D convolutions with Leaky ReLU and a linear projection to a score map."""

    def __init__(self, cfg: SFDiscriminatorConfig):
        super().__init__()
        layers = []
        in_channels = 1
        channels = cfg.resolved_channels
        for _ in range(cfg.n_conv_layers):
            layers.append(nn.Conv2d(in_channels, channels, cfg.kernel, stride=cfg.stride, padding=cfg.kernel // 2))
            in_channels = channels
        self.convs = nn.ModuleList(layers)
        self.slope = cfg.leaky_relu_slope
        self.projection = nn.Linear(channels, 1)

    def forward(self, band: torch.Tensor) -> torch.Tensor:
        """(B, T, bins) -> (B, T', bins')."""
        x = band.unsqueeze(1)
        for conv in self.convs:
            x = F.leaky_relu(conv(x), self.slope)
        return self.projection(x.permute(0, 2, 3, 1)).squeeze(-1)


class SubFrequencyGAN(nn.Module):
    def __init__(self, cfg: SFDiscriminatorConfig, n_mels: int):
        super().__init__()
        self.cfg = cfg
        self.spec = cfg.bands.validate_for(n_mels)
        self.discriminators = nn.ModuleList(SubBandDiscriminator(cfg) for _ in self.spec.bands)

    @property
    def n_bands(self) -> int:
        return len(self.discriminators)

    def forward(self, mel: torch.Tensor, lengths: torch.Tensor, generator: torch.Generator) -> list[torch.Tensor]:
        """Score a freshly sampled window of every band of a (B, T, n_mels) batch."""
        scores = []
        for band, discriminator in zip(split_subbands(mel, self.spec), self.discriminators):
            window = sample_window_batch(
                band, lengths, self.cfg.window_min_frames, self.cfg.window_max_frames, generator
            )
            scores.append(discriminator(window))
        return scores


def sf_generator_loss(fake_scores_per_band: list[torch.Tensor], n_bands: int | None = None) -> torch.Tensor:
    if n_bands is not None and len(fake_scores_per_band) != n_bands:
        raise ContractError(f'expected {n_bands} band scores, got {len(fake_scores_per_band)}')
    return lsgan_generator_loss(fake_scores_per_band)


def sf_discriminator_loss(real_scores: list[torch.Tensor], fake_scores: list[torch.Tensor]) -> list[torch.Tensor]:
    return lsgan_discriminator_loss(real_scores, fake_scores)
