"""
VOCODER.PY - Parallel waveform generator

A non-causal WaveNet-style stack of gated dilated convolutions turns Gaussian
noise into a waveform, conditioned on frame-level mel, F0 and V/UV upsampled
to sample rate. All samples are produced in one forward pass.
"""

import logging
import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import VocoderConfig
from .exceptions import ContractError, DomainError
from .features import AcousticFeatures, Waveform

logger = logging.getLogger(__name__)

# (fft_size, hop, win_length)
STFT_RESOLUTIONS = ((1024, 120, 600), (2048, 240, 1200), (512, 50, 240))
MAGNITUDE_FLOOR = 1e-7


# === CONDITIONING ===

def build_conditioning(feats: AcousticFeatures, use_f0: bool = True, use_vuv: bool = True) -> np.ndarray:
    """(T, aux_dims) matrix: normalized mel, then voiced-only normalized F0, then the V/UV flag."""
    if not feats.normalized:
        raise ContractError('vocoder conditioning expects normalized features')
    columns = [feats.mel]
    vuv = (np.asarray(feats.vuv) > 0).astype(np.float64)
    if use_f0:
        columns.append((np.asarray(feats.f0) * vuv)[:, None])
    if use_vuv:
        columns.append(vuv[:, None])
    return np.concatenate(columns, axis=1).astype(np.float32)


class ConditioningUpsampler(nn.Module):
    """Transposed convolutions for continuous features; plain repetition for V/UV."""

    def __init__(self, cfg: VocoderConfig):
        super().__init__()
        self.cfg = cfg
        self.continuous = cfg.n_mels + int(cfg.use_f0)
        self.layers = nn.ModuleList(
            nn.ConvTranspose1d(self.continuous, self.continuous, factor, stride=factor)
            for factor in cfg.upsample_factors
        )

    def forward(self, cond: torch.Tensor) -> torch.Tensor:
        """(B, T, aux_dims) -> (B, aux_dims, T * hop_samples)."""
        if cond.size(1) < 1:
            raise DomainError('conditioning needs at least one frame')
        if cond.size(-1) != self.cfg.aux_dims:
            raise ContractError(f'conditioning has {cond.size(-1)} dims, expected {self.cfg.aux_dims}')
        x = cond[..., :self.continuous].transpose(1, 2)
        for index, layer in enumerate(self.layers):
            x = layer(x)
            if index < len(self.layers) - 1:
                x = F.leaky_relu(x, 0.4)
        if self.cfg.use_vuv:
            flag = cond[..., -1:].transpose(1, 2).repeat_interleave(self.cfg.hop_samples, dim=2)
            x = torch.cat([x, flag], dim=1)
        return x


def upsample_conditioning(cond: torch.Tensor, upsampler: ConditioningUpsampler) -> torch.Tensor:
    return upsampler(cond)


# === GENERATOR ===

class ResidualBlock(nn.Module):
    def __init__(self, cfg: VocoderConfig, dilation: int):
        super().__init__()
        padding = dilation * (cfg.kernel - 1) // 2
        self.dilated = nn.Conv1d(cfg.residual_channels, cfg.gate_channels, cfg.kernel, padding=padding, dilation=dilation)
        self.aux = nn.Conv1d(cfg.aux_dims, cfg.gate_channels, 1, bias=False)
        half = cfg.gate_channels // 2
        self.out = nn.Conv1d(half, cfg.residual_channels, 1)
        self.skip = nn.Conv1d(half, cfg.skip_channels, 1)

    def forward(self, x: torch.Tensor, aux: torch.Tensor):
        h = self.dilated(x) + self.aux(aux)
        a, b = h.chunk(2, dim=1)
        h = torch.tanh(a) * torch.sigmoid(b)
        return (x + self.out(h)) * math.sqrt(0.5), self.skip(h)


class WaveGenerator(nn.Module):
    def __init__(self, cfg: VocoderConfig):
        super().__init__()
        self.cfg = cfg
        self.upsampler = ConditioningUpsampler(cfg)
        self.input = nn.Conv1d(1, cfg.residual_channels, 1)
        self.blocks = nn.ModuleList(
            ResidualBlock(cfg, dilation) for _ in range(cfg.n_stacks) for dilation in cfg.dilations
        )
        self.post1 = nn.Conv1d(cfg.skip_channels, cfg.skip_channels, 1)
        self.post2 = nn.Conv1d(cfg.skip_channels, 1, 1)

    def generate(self, noise: torch.Tensor, cond_upsampled: torch.Tensor) -> torch.Tensor:
        """(B, 1, N) noise and (B, aux_dims, N) conditioning -> (B, N) samples in (-1, 1)."""
        if noise.size(-1) != cond_upsampled.size(-1):
            raise ContractError(f'noise has {noise.size(-1)} samples, conditioning {cond_upsampled.size(-1)}')
        x = self.input(noise)
        skips = 0
        for block in self.blocks:
            x, skip = block(x, cond_upsampled)
            skips = skips + skip
        skips = skips * math.sqrt(1.0 / len(self.blocks))
        x = self.post2(F.relu(self.post1(F.relu(skips))))
        return torch.tanh(x).squeeze(1)

    def forward(self, noise: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """Frame-level conditioning (B, T, aux_dims) with noise (B, 1, T * hop)."""
        return self.generate(noise, self.upsampler(cond))

    @torch.no_grad()
    def vocode(self, conditioning: np.ndarray, sample_rate: int, generator: torch.Generator) -> Waveform:
        """Synthesize one utterance from a (T, aux_dims) conditioning matrix."""
        self.eval()
        param = next(self.parameters())
        cond = torch.as_tensor(conditioning, dtype=param.dtype, device=param.device).unsqueeze(0)
        n_samples = cond.size(1) * self.cfg.hop_samples
        noise = torch.randn(1, 1, n_samples, generator=generator, dtype=param.dtype).to(param.device)
        samples = self(noise, cond)[0].double().cpu().numpy()
        logger.debug('vocoded %d frames into %d samples', cond.size(1), samples.size)
        return Waveform(np.clip(samples, -1.0, 1.0), sample_rate)


def receptive_field(cfg: VocoderConfig) -> int:
    """Input span that influences one output sample of the dilated stack."""
    return 1 + cfg.n_stacks * (cfg.kernel - 1) * sum(cfg.dilations)


# === AUXILIARY LOSS ===

def _magnitude(x: torch.Tensor, fft_size: int, hop: int, win_length: int) -> torch.Tensor:
    window = torch.hann_window(win_length, dtype=x.dtype, device=x.device)
    spec = torch.stft(x, fft_size, hop, win_length, window=window, return_complex=True)
    return torch.sqrt(torch.clamp(spec.real ** 2 + spec.imag ** 2, min=MAGNITUDE_FLOOR))


def spectral_convergence(pred_mag: torch.Tensor, target_mag: torch.Tensor) -> torch.Tensor:
    return torch.linalg.norm(target_mag - pred_mag) / torch.linalg.norm(target_mag)


class MultiResolutionSTFTLoss(nn.Module):
    """Spectral convergence plus log-magnitude L1, averaged over STFT resolutions."""

    def __init__(self, resolutions=STFT_RESOLUTIONS):
        super().__init__()
        self.resolutions = tuple(resolutions)

    def forward(self, pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        if pred.shape != target.shape:
            raise ContractError(f'pred {tuple(pred.shape)} and target {tuple(target.shape)} differ in length')
        total = 0.0
        for fft_size, hop, win_length in self.resolutions:
            pred_mag = _magnitude(pred, fft_size, hop, win_length)
            target_mag = _magnitude(target, fft_size, hop, win_length)
            log_mag = F.l1_loss(torch.log(pred_mag), torch.log(target_mag))
            total = total + spectral_convergence(pred_mag, target_mag) + log_mag
        return total / len(self.resolutions)


def multires_stft_loss(pred, target) -> torch.Tensor:
    """Loss between two waveforms given as Waveform, numpy arrays or tensors."""
    pred = torch.as_tensor(pred.samples if isinstance(pred, Waveform) else pred)
    target = torch.as_tensor(target.samples if isinstance(target, Waveform) else target)
    return MultiResolutionSTFTLoss()(pred, target)
