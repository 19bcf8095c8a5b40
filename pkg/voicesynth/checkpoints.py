"""
CHECKPOINTS.PY - Versioned checkpoint files

A checkpoint is a ``torch.save`` dict with a header naming the format,
version and kind (acoustic or vocoder), the experiment config as JSON, the
normalization statistics and every state needed to resume bit-exactly.
"""

import logging
from pathlib import Path

import torch

from .config import ExperimentConfig
from .exceptions import CheckpointError, CompatibilityError
from .features import NormStats

logger = logging.getLogger(__name__)

FORMAT = 'singlab-checkpoint'
VERSION = 1
KINDS = ('acoustic', 'vocoder')


def save_checkpoint(path: str | Path, kind: str, payload: dict) -> Path:
    if kind not in KINDS:
        raise CheckpointError(f'unknown checkpoint kind {kind!r}')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = {'header': {'format': FORMAT, 'version': VERSION, 'kind': kind}, **payload}
    tmp = path.with_suffix(path.suffix + '.tmp')
    torch.save(blob, tmp)
    tmp.replace(path)
    logger.debug('saved %s checkpoint to %s', kind, path)
    return path


def load_checkpoint(path: str | Path, kind: str | None = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f'checkpoint {path} does not exist')
    try:
        blob = torch.load(path, map_location='cpu', weights_only=True)
    except Exception as exc:
        raise CheckpointError(f'{path} is not a readable checkpoint: {exc}') from exc
    header = blob.get('header') if isinstance(blob, dict) else None
    if not header or header.get('format') != FORMAT:
        raise CheckpointError(f'{path} has no {FORMAT} header')
    if header.get('version') != VERSION:
        raise CheckpointError(f"{path} is version {header.get('version')}, expected {VERSION}")
    if kind is not None and header.get('kind') != kind:
        raise CheckpointError(f"{path} is a {header.get('kind')} checkpoint, expected {kind}")
    return blob


def checkpoint_config(blob: dict) -> ExperimentConfig:
    return ExperimentConfig.model_validate(blob['config'])


def checkpoint_stats(blob: dict) -> NormStats:
    return NormStats.from_dict(blob['norm_stats'])


def check_compatible(acoustic: dict, vocoder: dict) -> None:
    """Raise CompatibilityError unless two checkpoints agree on framing and features."""
    a, v = checkpoint_config(acoustic), checkpoint_config(vocoder)
    problems = []
    if a.feature.n_mels != v.vocoder.n_mels:
        problems.append(f'n_mels {a.feature.n_mels} vs {v.vocoder.n_mels}')
    if a.feature.hop_samples != v.vocoder.hop_samples:
        problems.append(f'hop {a.feature.hop_samples} vs {v.vocoder.hop_samples} samples')
    if a.feature.sample_rate != v.feature.sample_rate:
        problems.append(f'sample rate {a.feature.sample_rate} vs {v.feature.sample_rate}')
    if acoustic['norm_stats'] != vocoder['norm_stats']:
        problems.append('normalization statistics differ')
    if problems:
        raise CompatibilityError('acoustic and vocoder checkpoints are incompatible: ' + '; '.join(problems))
