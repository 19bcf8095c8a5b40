"""
PIPELINE.PY - Score-to-waveform synthesis and objective evaluation
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import librosa
import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field

from .acoustic import AcousticModel
from .checkpoints import check_compatible, checkpoint_config, checkpoint_stats, load_checkpoint
from .config import FeatureConfig
from .dataset import FeatureCorpus
from .exceptions import DataError
from .features import (
    AcousticFeatures, FeatureRecord, Waveform, denormalize, extract_features, normalize, read_wav,
)
from .score import PhonemeLexicon, Score, ScoreSequence, encode_score, load_score, transpose_score
from .vocoder import WaveGenerator, build_conditioning

logger = logging.getLogger(__name__)


# === MODEL LOADING ===

def load_acoustic(path: str | Path, device: str = 'cpu'):
    blob = load_checkpoint(path, 'acoustic')
    model = AcousticModel(checkpoint_config(blob).acoustic)
    model.load_state_dict(blob['model'])
    return model.to(device).eval(), blob


def load_vocoder(path: str | Path, device: str = 'cpu'):
    blob = load_checkpoint(path, 'vocoder')
    model = WaveGenerator(checkpoint_config(blob).vocoder)
    model.load_state_dict(blob['model'])
    return model.to(device).eval(), blob


# === SYNTHESIS ===

@dataclass(frozen=True)
class SynthesisResult:
    waveform: Waveform
    features: AcousticFeatures
    sequence: ScoreSequence


def synthesize(score: Score | str | Path, acoustic_ckpt: str | Path, vocoder_ckpt: str | Path,
               pitch_shift: int = 0, seed: int = 1234, device: str = 'cpu') -> SynthesisResult:
    """Score -> durations -> frame features -> waveform, optionally transposed by ``pitch_shift`` semitones."""
    if not isinstance(score, Score):
        score = load_score(score)
    acoustic, a_blob = load_acoustic(acoustic_ckpt, device)
    vocoder, v_blob = load_vocoder(vocoder_ckpt, device)
    check_compatible(a_blob, v_blob)
    config = checkpoint_config(a_blob)
    stats = checkpoint_stats(a_blob)
    lexicon = PhonemeLexicon(a_blob['lexicon'])

    if pitch_shift:
        score = transpose_score(score, pitch_shift)
    encoded = encode_score(score, lexicon, config.feature.hop_s)
    sequence = ScoreSequence(
        phoneme_ids=encoded.phoneme_ids, pitch_ids=encoded.pitch_ids,
        duration_frames=np.minimum(encoded.duration_frames, config.acoustic.max_duration_frames),
    )
    feats = acoustic.infer(sequence, stats, hop=config.feature.hop_s, window=config.feature.window_s)
    vcfg = checkpoint_config(v_blob).vocoder
    cond = build_conditioning(normalize(feats, stats), vcfg.use_f0, vcfg.use_vuv)
    wave = vocoder.vocode(cond, config.feature.sample_rate, torch.Generator().manual_seed(seed))
    logger.info('synthesized %d frames (%.2f s)', feats.n_frames, wave.duration)
    return SynthesisResult(waveform=wave, features=feats, sequence=encoded)


def copy_synthesize(record: FeatureRecord, corpus: FeatureCorpus, vocoder: WaveGenerator,
                    seed: int = 1234) -> Waveform:
    """Vocode ground-truth features."""
    cond = corpus.conditioning(record, vocoder.cfg)
    return vocoder.vocode(cond, corpus.feature.sample_rate, torch.Generator().manual_seed(seed))


@torch.no_grad()
def teacher_forced_features(model: AcousticModel, corpus: FeatureCorpus, record: FeatureRecord) -> AcousticFeatures:
    """Acoustic model output driven by true durations, denormalized."""
    model.eval()
    device = next(model.parameters()).device
    batch = corpus.acoustic_batch([record], model.cfg.max_duration_frames)
    pred = model(batch.phoneme_ids.to(device), batch.pitch_ids.to(device), batch.duration_ids.to(device),
                 batch.phoneme_mask.to(device), durations=batch.durations.to(device))
    vuv = pred.vuv[0].cpu().numpy()
    semitones = pred.f0_semitones[0].double().cpu().numpy()
    f0 = np.where(vuv > 0, (semitones - corpus.stats.f0_mean) / corpus.stats.f0_std, 0.0)
    normalized = AcousticFeatures(
        mel=pred.mel[0].double().cpu().numpy(), f0=f0, vuv=vuv.astype(np.int64),
        hop=record.features.hop, window=record.features.window, normalized=True,
    )
    return denormalize(normalized, corpus.stats)


# === EVALUATION ===

class UtteranceMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    mel_l1: float = Field(ge=0)
    f0_rmse_cents: float = Field(ge=0)
    vuv_error_rate: float = Field(ge=0, le=1)
    spectral_convergence: float = Field(ge=0)
    frames: int = Field(ge=1)


class EvalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    aggregate: UtteranceMetrics
    per_utterance: dict[str, UtteranceMetrics]

    @classmethod
    def from_metrics(cls, per_utterance: dict[str, UtteranceMetrics]) -> 'EvalReport':
        if not per_utterance:
            raise DataError('nothing to evaluate')
        rows = list(per_utterance.values())
        aggregate = UtteranceMetrics(
            **{name: float(np.mean([getattr(r, name) for r in rows]))
               for name in ('mel_l1', 'f0_rmse_cents', 'vuv_error_rate', 'spectral_convergence')},
            frames=sum(r.frames for r in rows),
        )
        return cls(aggregate=aggregate, per_utterance=per_utterance)


def f0_rmse_cents(pred_f0: np.ndarray, ref_f0: np.ndarray, pred_vuv: np.ndarray, ref_vuv: np.ndarray) -> float:
    both = (np.asarray(pred_vuv) > 0) & (np.asarray(ref_vuv) > 0) & (pred_f0 > 0) & (ref_f0 > 0)
    if not both.any():
        return 0.0
    cents = 1200.0 * np.log2(pred_f0[both] / ref_f0[both])
    return float(np.sqrt(np.mean(cents ** 2)))


def _overlap(pred: AcousticFeatures, ref: AcousticFeatures):
    frames = min(pred.n_frames, ref.n_frames)
    if frames == 0:
        raise DataError('prediction and reference share no frames')
    return pred.truncate(frames), ref.truncate(frames), frames


def evaluate(pred: AcousticFeatures, ref: AcousticFeatures, stats=None,
             spectral_convergence: float | None = None) -> UtteranceMetrics:
    """Compare unnormalized features after truncation to the shorter one.

    With ``stats`` the mel L1 is measured on normalized mel. Spectral
    convergence defaults to the mel-energy version.
    """
    if pred.normalized or ref.normalized:
        raise DataError('evaluate expects unnormalized features')
    pred, ref, frames = _overlap(pred, ref)
    if stats is not None:
        mel_l1 = float(np.mean(np.abs(normalize(pred, stats).mel - normalize(ref, stats).mel)))
    else:
        mel_l1 = float(np.mean(np.abs(pred.mel - ref.mel)))
    if spectral_convergence is None:
        ref_energy, pred_energy = np.exp(ref.mel), np.exp(pred.mel)
        spectral_convergence = float(np.linalg.norm(ref_energy - pred_energy) / np.linalg.norm(ref_energy))
    return UtteranceMetrics(
        mel_l1=mel_l1,
        f0_rmse_cents=f0_rmse_cents(pred.f0, ref.f0, pred.vuv, ref.vuv),
        vuv_error_rate=float(np.mean((pred.vuv > 0) != (ref.vuv > 0))),
        spectral_convergence=spectral_convergence,
        frames=frames,
    )


def stft_spectral_convergence(pred: Waveform, ref: Waveform, feature: FeatureConfig) -> float:
    n = min(len(pred), len(ref))
    if n <= feature.window_samples:
        raise DataError('waveforms overlap by less than one analysis window')
    kwargs = {'n_fft': feature.window_samples, 'hop_length': feature.hop_samples}
    ref_mag = np.abs(librosa.stft(ref.samples[:n], **kwargs))
    pred_mag = np.abs(librosa.stft(pred.samples[:n], **kwargs))
    return float(np.linalg.norm(ref_mag - pred_mag) / np.linalg.norm(ref_mag))


def evaluate_waveforms(pred: Waveform, ref: Waveform, feature: FeatureConfig, stats=None) -> UtteranceMetrics:
    sc = stft_spectral_convergence(pred, ref, feature)
    return evaluate(extract_features(pred, feature), extract_features(ref, feature), stats, spectral_convergence=sc)


def evaluate_directories(pred_dir: str | Path, corpus: FeatureCorpus) -> EvalReport:
    """Score every ``<name>.wav`` or ``<name>.npz`` in ``pred_dir`` against the feature corpus."""
    pred_dir = Path(pred_dir)
    metrics = {}
    for record in corpus.records:
        wav, npz = pred_dir / f'{record.name}.wav', pred_dir / f'{record.name}.npz'
        if wav.is_file():
            pred = read_wav(wav, corpus.feature.sample_rate)
            metrics[record.name] = evaluate_waveforms(pred, corpus.waveform(record.name), corpus.feature, corpus.stats)
        elif npz.is_file():
            metrics[record.name] = evaluate(FeatureRecord.load(npz).features, record.features, corpus.stats)
    if not metrics:
        raise DataError(f'{pred_dir} holds no predictions matching {corpus.root}')
    return EvalReport.from_metrics(metrics)


def evaluate_acoustic(checkpoint: str | Path, corpus: FeatureCorpus, device: str = 'cpu') -> EvalReport:
    model, _ = load_acoustic(checkpoint, device)
    return EvalReport.from_metrics({
        record.name: evaluate(teacher_forced_features(model, corpus, record), record.features, corpus.stats)
        for record in corpus.records
    })


def evaluate_vocoder(checkpoint: str | Path, corpus: FeatureCorpus, seed: int = 1234, device: str = 'cpu') -> EvalReport:
    vocoder, _ = load_vocoder(checkpoint, device)
    metrics = {}
    for record in corpus.records:
        wave = copy_synthesize(record, corpus, vocoder, seed)
        metrics[record.name] = evaluate_waveforms(wave, corpus.waveform(record.name), corpus.feature, corpus.stats)
    return EvalReport.from_metrics(metrics)
