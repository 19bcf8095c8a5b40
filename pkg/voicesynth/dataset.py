"""
DATASET.PY - Feature cache and training batches

``extract_corpus_features`` turns a corpus directory (scores, WAVs and
ground-truth annotations) into a feature directory: one .npz per utterance,
``norm_stats.json``, a copy of the lexicon and a ``manifest.json``.
``FeatureCorpus`` reads that directory back and assembles padded batches.
"""

import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from tqdm import tqdm

from .acoustic import lengths_to_mask
from .config import FeatureConfig, VocoderConfig
from .corpus import load_truth
from .exceptions import DataError
from .features import (
    AcousticFeatures, FeatureRecord, NormStats, Waveform, compute_norm_stats, extract_features, normalize,
    read_wav, vuv_from_f0,
)
from .score import PhonemeLexicon, encode_score, hz_to_semitone, load_score
from .vocoder import build_conditioning

logger = logging.getLogger(__name__)

F0_SOURCES = ('tracker', 'analytic')


def extract_corpus_features(corpus_dir: str | Path, out_dir: str | Path, feature: FeatureConfig,
                            f0_source: str = 'tracker', progress: bool = False) -> list[FeatureRecord]:
    if f0_source not in F0_SOURCES:
        raise DataError(f'f0_source must be one of {F0_SOURCES}')
    corpus, out = Path(corpus_dir), Path(out_dir)
    scores = sorted((corpus / 'scores').glob('*.json'))
    if not scores:
        raise DataError(f'{corpus} holds no scores')
    lexicon = PhonemeLexicon.load(corpus / 'lexicon.json')
    out.mkdir(parents=True, exist_ok=True)

    records = []
    for score_path in tqdm(scores, desc='features', disable=not progress):
        name = score_path.stem
        sequence = encode_score(load_score(score_path), lexicon, feature.hop_s)
        wave = read_wav(corpus / 'wavs' / f'{name}.wav', feature.sample_rate)
        feats = extract_features(wave, feature)
        truth = load_truth(corpus / 'truth' / f'{name}.npz')
        if f0_source == 'analytic':
            if len(truth['f0']) != feats.n_frames:
                raise DataError(f"{name}: analytic F0 has {len(truth['f0'])} frames, features {feats.n_frames}")
            vuv = vuv_from_f0(truth['f0'], feature.vuv_threshold)
            feats = AcousticFeatures(mel=feats.mel, f0=truth['f0'] * vuv, vuv=vuv, hop=feats.hop, window=feats.window)
        record = FeatureRecord(
            name=name, phoneme_ids=sequence.phoneme_ids, pitch_ids=sequence.pitch_ids,
            duration_ids=sequence.duration_frames, durations=truth['durations'], features=feats,
        )
        record.check_alignment()
        record.save(out / f'{name}.npz')
        records.append(record)

    stats = compute_norm_stats(r.features for r in records)
    stats.save(out / 'norm_stats.json')
    shutil.copyfile(corpus / 'lexicon.json', out / 'lexicon.json')
    manifest = {
        'corpus_dir': str(corpus.resolve()),
        'f0_source': f0_source,
        'feature': feature.model_dump(mode='json'),
        'utterances': [r.name for r in records],
    }
    (out / 'manifest.json').write_text(json.dumps(manifest, indent=2), encoding='utf-8')
    logger.info('extracted features for %d utterances into %s', len(records), out)
    return records


@dataclass
class AcousticBatch:
    phoneme_ids: torch.Tensor   # (B, N)
    pitch_ids: torch.Tensor
    duration_ids: torch.Tensor
    durations: torch.Tensor     # true frames per phoneme
    phoneme_mask: torch.Tensor
    mel: torch.Tensor           # (B, T, n_mels), normalized
    f0: torch.Tensor            # (B, T) semitones, 0 when unvoiced
    vuv: torch.Tensor           # (B, T)
    frame_lengths: torch.Tensor


@dataclass
class VocoderBatch:
    cond: torch.Tensor          # (B, S, aux_dims)
    audio: torch.Tensor         # (B, S * hop)


def _pad(arrays, dtype) -> torch.Tensor:
    width = max(len(a) for a in arrays)
    tail = arrays[0].shape[1:]
    out = np.zeros((len(arrays), width, *tail))
    for i, a in enumerate(arrays):
        out[i, :len(a)] = a
    return torch.as_tensor(out, dtype=dtype)


class FeatureCorpus:
    """A feature directory loaded into memory."""

    def __init__(self, feature_dir: str | Path):
        self.root = Path(feature_dir)
        manifest_path = self.root / 'manifest.json'
        if not manifest_path.is_file():
            raise DataError(f'{self.root} is not a feature directory (no manifest.json)')
        self.manifest = json.loads(manifest_path.read_text(encoding='utf-8'))
        self.feature = FeatureConfig.model_validate(self.manifest['feature'])
        self.stats = NormStats.load(self.root / 'norm_stats.json')
        self.lexicon = PhonemeLexicon.load(self.root / 'lexicon.json')
        self.records = [FeatureRecord.load(self.root / f'{name}.npz') for name in self.manifest['utterances']]
        if not self.records:
            raise DataError(f'{self.root} holds no utterances')
        self._waves: dict[str, Waveform] = {}

    def __len__(self):
        return len(self.records)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.records]

    def waveform(self, name: str) -> Waveform:
        if name not in self._waves:
            path = Path(self.manifest['corpus_dir']) / 'wavs' / f'{name}.wav'
            self._waves[name] = read_wav(path, self.feature.sample_rate)
        return self._waves[name]

    def pick(self, batch_size: int, generator: torch.Generator) -> list[FeatureRecord]:
        order = torch.randperm(len(self.records), generator=generator)[:batch_size]
        return [self.records[i] for i in order.tolist()]

    def acoustic_batch(self, records: list[FeatureRecord], max_duration: int = 1000,
                       dtype=torch.float32) -> AcousticBatch:
        mels, f0s, vuvs = [], [], []
        for record in records:
            normed = normalize(record.features, self.stats)
            raw = record.features
            voiced = raw.vuv > 0
            semitones = np.zeros(raw.n_frames)
            semitones[voiced] = hz_to_semitone(raw.f0[voiced])
            mels.append(normed.mel)
            f0s.append(semitones)
            vuvs.append(raw.vuv.astype(np.float64))
        lengths = torch.tensor([len(r.phoneme_ids) for r in records])
        return AcousticBatch(
            phoneme_ids=_pad([r.phoneme_ids for r in records], torch.long),
            pitch_ids=_pad([r.pitch_ids for r in records], torch.long),
            duration_ids=_pad([np.minimum(r.duration_ids, max_duration) for r in records], torch.long),
            durations=_pad([r.durations for r in records], torch.long),
            phoneme_mask=lengths_to_mask(lengths),
            mel=_pad(mels, dtype), f0=_pad(f0s, dtype), vuv=_pad(vuvs, dtype),
            frame_lengths=torch.tensor([r.features.n_frames for r in records]),
        )

    def conditioning(self, record: FeatureRecord, cfg: VocoderConfig) -> np.ndarray:
        return build_conditioning(normalize(record.features, self.stats), cfg.use_f0, cfg.use_vuv)

    def vocoder_batch(self, records: list[FeatureRecord], cfg: VocoderConfig, segment_frames: int,
                      generator: torch.Generator, dtype=torch.float32) -> VocoderBatch:
        """Aligned random segments of conditioning frames and audio, one per record."""
        frames = min(segment_frames, *(r.features.n_frames for r in records))
        hop = cfg.hop_samples
        conds, audios = [], []
        for record in records:
            start = int(torch.randint(0, record.features.n_frames - frames + 1, (1,), generator=generator))
            samples = self.waveform(record.name).samples
            if len(samples) < record.features.n_frames * hop:
                samples = np.pad(samples, (0, record.features.n_frames * hop - len(samples)))
            conds.append(self.conditioning(record, cfg)[start:start + frames])
            audios.append(samples[start * hop:(start + frames) * hop])
        return VocoderBatch(
            cond=torch.as_tensor(np.stack(conds), dtype=dtype),
            audio=torch.as_tensor(np.stack(audios), dtype=dtype),
        )
