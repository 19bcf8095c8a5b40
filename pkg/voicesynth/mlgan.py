"""
MLGAN.PY - Multi-length adversarial training for the vocoder

One 1-D dilated-convolution discriminator per crop length (0.25, 0.5, 0.75
and 1.0 s by default). Each step every discriminator judges a random crop
of its length; real and generated crops of one item share a start offset.
Lengths longer than the training segment are skipped for that step.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .adversarial import lsgan_discriminator_loss, lsgan_generator_loss, uniform_int
from .config import MLDiscriminatorConfig


def random_crop(samples, length_s: float, sample_rate: int, generator: torch.Generator):
    """Contiguous crop of ``length_s`` seconds with a uniform start; shorter inputs come back whole."""
    length = round(length_s * sample_rate)
    if len(samples) <= length:
        return samples
    start = uniform_int(0, len(samples) - length, generator)
    return samples[start:start + length]


def sample_crop_starts(n_samples: int, batch_size: int, lengths: list[int], generator: torch.Generator):
    """Per-item start offsets for each crop length, or None where the segment is too short."""
    starts = []
    for length in lengths:
        if n_samples < length:
            starts.append(None)
            continue
        starts.append([uniform_int(0, n_samples - length, generator) for _ in range(batch_size)])
    return starts


def crop_batch(waveforms: torch.Tensor, length: int, starts: list[int]) -> torch.Tensor:
    return torch.stack([w[start:start + length] for w, start in zip(waveforms, starts)])


class MultiLengthDiscriminator(nn.Module):
    """Non-causal dilated 1-D convolutions, dilations 1..n, ending in a per-sample score."""

    def __init__(self, cfg: MLDiscriminatorConfig):
        super().__init__()
        layers = []
        in_channels = 1
        for dilation in cfg.dilations:
            padding = dilation * (cfg.kernel - 1) // 2
            layers.append(nn.Conv1d(in_channels, cfg.channels, cfg.kernel, padding=padding, dilation=dilation))
            in_channels = cfg.channels
        self.convs = nn.ModuleList(layers)
        self.slope = cfg.leaky_relu_slope
        self.projection = nn.Conv1d(cfg.channels, 1, 1)

    def forward(self, segment: torch.Tensor) -> torch.Tensor:
        """(B, L) -> (B, L)."""
        x = segment.unsqueeze(1)
        for conv in self.convs:
            x = F.leaky_relu(conv(x), self.slope)
        return self.projection(x).squeeze(1)


class MultiLengthGAN(nn.Module):
    def __init__(self, cfg: MLDiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        self.lengths = cfg.crops.lengths_samples
        self.discriminators = nn.ModuleList(MultiLengthDiscriminator(cfg) for _ in self.lengths)

    @property
    def enabled(self) -> bool:
        return len(self.discriminators) > 0

    def sample_starts(self, waveforms: torch.Tensor, generator: torch.Generator):
        return sample_crop_starts(waveforms.size(-1), waveforms.size(0), self.lengths, generator)

    def forward(self, waveforms: torch.Tensor, starts) -> list[torch.Tensor]:
        """Score maps for every length applied this step, in configured order."""
        scores = []
        for length, item_starts, discriminator in zip(self.lengths, starts, self.discriminators):
            if item_starts is None:
                continue
            scores.append(discriminator(crop_batch(waveforms, length, item_starts)))
        return scores


def ml_generator_loss(fake_scores_per_length: list[torch.Tensor]) -> torch.Tensor:
    if not fake_scores_per_length:
        return torch.zeros(())
    return lsgan_generator_loss(fake_scores_per_length)


def ml_discriminator_loss(real_scores: list[torch.Tensor], fake_scores: list[torch.Tensor]) -> list[torch.Tensor]:
    return lsgan_discriminator_loss(real_scores, fake_scores)
