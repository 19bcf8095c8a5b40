"""
ACOUSTIC.PY - Non-autoregressive score-to-feature model

Encoder and decoder are stacks of feed-forward Transformer blocks (self
attention followed by a two-layer 1-D convolution). The encoder output is
expanded to frame rate by a length regulator driven by ground-truth durations
in training and by the duration predictor at inference. The decoder predicts
normalized mel, a semitone F0 residual over the note pitch, and a V/UV logit.
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.rnn import pad_sequence

from .config import AcousticModelConfig
from .exceptions import ContractError, DomainError, EmbeddingError
from .features import AcousticFeatures, NormStats, denormalize
from .score import REST_PITCH_ID, ScoreSequence, semitone_to_hz


def sinusoid_encoding(length: int, channels: int, device=None, dtype=torch.float32) -> torch.Tensor:
    position = torch.arange(length, device=device, dtype=dtype).unsqueeze(1)
    index = torch.arange(channels, device=device, dtype=dtype)
    angle = position / torch.pow(10000.0, 2 * torch.div(index, 2, rounding_mode='floor') / channels)
    table = torch.zeros(length, channels, device=device, dtype=dtype)
    table[:, 0::2] = torch.sin(angle[:, 0::2])
    table[:, 1::2] = torch.cos(angle[:, 1::2])
    return table


def lengths_to_mask(lengths: torch.Tensor, max_len: int | None = None) -> torch.Tensor:
    """True on valid positions, shape (B, max_len)."""
    max_len = max_len or int(lengths.max())
    return torch.arange(max_len, device=lengths.device).unsqueeze(0) < lengths.unsqueeze(1)


class FFTBlock(nn.Module):
    """Self attention + position-wise convolution, each with residual and post layer norm."""

    def __init__(self, hidden: int, n_heads: int, filter_size: int, kernel: int, dropout: float):
        super().__init__()
        self.attention = nn.MultiheadAttention(hidden, n_heads, dropout=dropout, batch_first=True)
        self.attention_norm = nn.LayerNorm(hidden)
        self.conv1 = nn.Conv1d(hidden, filter_size, kernel, padding=(kernel - 1) // 2)
        self.conv2 = nn.Conv1d(filter_size, hidden, 1)
        self.conv_norm = nn.LayerNorm(hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        pad = ~mask
        attended, _ = self.attention(x, x, x, key_padding_mask=pad, need_weights=False)
        x = self.attention_norm(x + self.dropout(attended))
        x = x.masked_fill(pad.unsqueeze(-1), 0.0)
        hidden = self.conv2(F.relu(self.conv1(x.transpose(1, 2)))).transpose(1, 2)
        x = self.conv_norm(x + self.dropout(hidden))
        return x.masked_fill(pad.unsqueeze(-1), 0.0)


class FFTStack(nn.Module):
    def __init__(self, cfg: AcousticModelConfig, n_blocks: int):
        super().__init__()
        self.blocks = nn.ModuleList(
            FFTBlock(cfg.hidden, cfg.n_heads, cfg.conv_filter, cfg.conv_kernel, cfg.dropout)
            for _ in range(n_blocks)
        )

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = x + sinusoid_encoding(x.size(1), x.size(2), x.device, x.dtype).unsqueeze(0)
        for block in self.blocks:
            x = block(x, mask)
        return x


class DurationPredictor(nn.Module):
    """Two conv layers and a linear head; predicts log frame counts per phoneme."""

    def __init__(self, cfg: AcousticModelConfig):
        super().__init__()
        pad = (cfg.duration_kernel - 1) // 2
        self.conv1 = nn.Conv1d(cfg.hidden, cfg.duration_filter, cfg.duration_kernel, padding=pad)
        self.norm1 = nn.LayerNorm(cfg.duration_filter)
        self.conv2 = nn.Conv1d(cfg.duration_filter, cfg.duration_filter, cfg.duration_kernel, padding=pad)
        self.norm2 = nn.LayerNorm(cfg.duration_filter)
        self.dropout = nn.Dropout(cfg.dropout)
        self.linear = nn.Linear(cfg.duration_filter, 1)

    def forward(self, hiddens: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.conv1(hiddens.transpose(1, 2))).transpose(1, 2)
        x = self.dropout(self.norm1(x))
        x = F.relu(self.conv2(x.transpose(1, 2))).transpose(1, 2)
        x = self.dropout(self.norm2(x))
        return self.linear(x).squeeze(-1).masked_fill(~mask, 0.0)


def durations_from_log(durations_log: torch.Tensor) -> torch.Tensor:
    """Inference frame counts: max(1, round(exp(prediction)))."""
    return torch.clamp(torch.round(torch.exp(durations_log)), min=1).long()


def length_regulate(hiddens: torch.Tensor, durations: torch.Tensor) -> torch.Tensor:
    """Repeat row i of an (N, H) matrix ``durations[i]`` times."""
    if hiddens.dim() != 2 or durations.dim() != 1 or len(hiddens) != len(durations):
        raise ContractError('expected (N, H) hiddens and N durations')
    if bool((durations < 1).any()):
        raise DomainError('durations must be at least 1 frame')
    return torch.repeat_interleave(hiddens, durations.long(), dim=0)


def regulate_batch(hiddens: torch.Tensor, durations: torch.Tensor, mask: torch.Tensor):
    """Batched length regulation; padded phonemes are dropped. Returns (expanded, frame_mask)."""
    expanded = [length_regulate(h[m], d[m]) for h, d, m in zip(hiddens, durations, mask)]
    lengths = torch.tensor([len(e) for e in expanded], device=hiddens.device)
    return pad_sequence(expanded, batch_first=True), lengths_to_mask(lengths)


@dataclass
class AcousticOutput:
    mel: torch.Tensor            # (B, T, n_mels), normalized scale
    f0_residual: torch.Tensor    # (B, T) semitones over the note pitch
    vuv_logit: torch.Tensor      # (B, T)
    durations_log: torch.Tensor  # (B, N)
    note_pitch: torch.Tensor     # (B, T) note pitch per frame
    frame_mask: torch.Tensor     # (B, T)

    @property
    def f0_semitones(self) -> torch.Tensor:
        return self.note_pitch + self.f0_residual

    @property
    def f0_hz(self) -> torch.Tensor:
        return semitone_to_hz(self.f0_semitones)

    @property
    def vuv(self) -> torch.Tensor:
        return (torch.sigmoid(self.vuv_logit) > 0.5).long()


class AcousticModel(nn.Module):
    def __init__(self, cfg: AcousticModelConfig):
        super().__init__()
        self.cfg = cfg
        self.phoneme_embedding = nn.Embedding(cfg.n_phonemes, cfg.hidden, padding_idx=0)
        self.pitch_embedding = nn.Embedding(cfg.n_pitch_ids, cfg.hidden)
        self.duration_embedding = nn.Embedding(cfg.max_duration_frames + 1, cfg.hidden)
        self.encoder = FFTStack(cfg, cfg.n_encoder_blocks)
        self.duration_predictor = DurationPredictor(cfg)
        self.decoder = FFTStack(cfg, cfg.n_decoder_blocks)
        self.mel_head = nn.Linear(cfg.hidden, cfg.n_mels)
        self.f0_head = nn.Linear(cfg.hidden, 1)
        self.vuv_head = nn.Linear(cfg.hidden, 1)

    def _check_ids(self, name: str, ids: torch.Tensor, size: int) -> None:
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= size):
            raise EmbeddingError(f'{name} IDs must lie in [0, {size}); got [{int(ids.min())}, {int(ids.max())}]')

    def encode(self, phoneme_ids, pitch_ids, duration_ids, mask) -> torch.Tensor:
        """Sum of phoneme, pitch and duration embeddings through the encoder; (B, N, hidden)."""
        if phoneme_ids.size(1) < 1:
            raise DomainError('need at least one phoneme')
        self._check_ids('phoneme', phoneme_ids, self.cfg.n_phonemes)
        self._check_ids('pitch', pitch_ids, self.cfg.n_pitch_ids)
        self._check_ids('duration', duration_ids, self.cfg.max_duration_frames + 1)
        x = self.phoneme_embedding(phoneme_ids) + self.pitch_embedding(pitch_ids) + self.duration_embedding(duration_ids)
        return self.encoder(x, mask)

    def predict_durations(self, hiddens: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.duration_predictor(hiddens, mask)

    def decode(self, expanded: torch.Tensor, note_pitch: torch.Tensor, frame_mask: torch.Tensor, durations_log=None):
        if expanded.shape[:2] != note_pitch.shape or note_pitch.shape != frame_mask.shape:
            raise ContractError(
                f'expanded {tuple(expanded.shape[:2])}, note pitch {tuple(note_pitch.shape)} '
                f'and frame mask {tuple(frame_mask.shape)} disagree'
            )
        x = self.decoder(expanded, frame_mask)
        return AcousticOutput(
            mel=self.mel_head(x),
            f0_residual=self.f0_head(x).squeeze(-1),
            vuv_logit=self.vuv_head(x).squeeze(-1),
            durations_log=durations_log,
            note_pitch=note_pitch.to(x.dtype),
            frame_mask=frame_mask,
        )

    def forward(self, phoneme_ids, pitch_ids, duration_ids, phoneme_mask, durations=None) -> AcousticOutput:
        """Teacher-forced when ``durations`` is given, otherwise driven by predicted durations."""
        hiddens = self.encode(phoneme_ids, pitch_ids, duration_ids, phoneme_mask)
        durations_log = self.predict_durations(hiddens, phoneme_mask)
        if durations is None:
            durations = durations_from_log(durations_log.detach())
        durations = durations.masked_fill(~phoneme_mask, 0)
        expanded, frame_mask = regulate_batch(hiddens, durations, phoneme_mask)
        pitch_frames, _ = regulate_batch(pitch_ids.unsqueeze(-1), durations, phoneme_mask)
        return self.decode(expanded, pitch_frames.squeeze(-1), frame_mask, durations_log)

    @torch.no_grad()
    def infer(self, sequence: ScoreSequence, stats: NormStats, hop: float = 0.005,
              window: float = 0.020) -> AcousticFeatures:
        """Predict denormalized features for one encoded score."""
        self.eval()
        device = next(self.parameters()).device
        phonemes = torch.as_tensor(sequence.phoneme_ids, device=device).unsqueeze(0)
        pitches = torch.as_tensor(sequence.pitch_ids, device=device).unsqueeze(0)
        duration_ids = torch.as_tensor(sequence.duration_frames, device=device).unsqueeze(0)
        mask = torch.ones_like(phonemes, dtype=torch.bool)
        out = self(phonemes, pitches, duration_ids, mask)
        semitones = out.f0_semitones[0].double().cpu().numpy()
        vuv = out.vuv[0].cpu().numpy()
        rest = out.note_pitch[0].cpu().numpy() >= REST_PITCH_ID
        vuv = np.where(rest, 0, vuv)
        f0_norm = np.where(vuv > 0, (semitones - stats.f0_mean) / stats.f0_std, 0.0)
        normalized = AcousticFeatures(
            mel=out.mel[0].double().cpu().numpy(), f0=f0_norm, vuv=vuv.astype(np.int64),
            hop=hop, window=window, normalized=True,
        )
        return denormalize(normalized, stats)


def reconstruction_loss(pred: AcousticOutput, target_mel, target_f0, target_vuv, dur_target, phoneme_mask) -> dict:
    """Masked reconstruction terms.

    ``target_f0`` is in semitones (MIDI scale) and only counts on voiced
    frames; ``dur_target`` holds ground-truth frames per phoneme.
    """
    if pred.mel.shape != target_mel.shape or pred.vuv_logit.shape != target_vuv.shape:
        raise ContractError(f'prediction {tuple(pred.mel.shape)} and target {tuple(target_mel.shape)} are not frame-aligned')
    frame_mask = pred.frame_mask
    frames = frame_mask.sum().clamp(min=1)
    mel_l1 = ((pred.mel - target_mel).abs() * frame_mask.unsqueeze(-1)).sum() / (frames * pred.mel.size(-1))

    voiced = frame_mask & (target_vuv > 0)
    if bool(voiced.any()):
        f0_l2 = ((pred.f0_semitones - target_f0) ** 2)[voiced].mean()
    else:
        f0_l2 = pred.mel.new_zeros(())

    bce = F.binary_cross_entropy_with_logits(pred.vuv_logit, target_vuv.to(pred.vuv_logit.dtype), reduction='none')
    vuv_bce = (bce * frame_mask).sum() / frames

    log_target = torch.log(dur_target.clamp(min=1).to(pred.durations_log.dtype))
    dur_mse = ((pred.durations_log - log_target) ** 2)[phoneme_mask].mean()
    return {'mel_l1': mel_l1, 'f0_l2_voiced': f0_l2, 'vuv_bce': vuv_bce, 'dur_mse_log': dur_mse}
