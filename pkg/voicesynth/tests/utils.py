"""Shared fixtures: small configs and an on-disk corpus + feature directory."""

from pathlib import Path

import numpy as np
import torch

from voicesynth.config import build_config
from voicesynth.corpus import default_lexicon, generate_corpus, write_corpus
from voicesynth.dataset import extract_corpus_features
from voicesynth.features import Waveform

TEST_OVERRIDES = {
    'corpus': {
        'n_utterances': 3, 'notes_per_utterance': (2, 3), 'note_values': ('1/8', '1/4'),
        'tempo_range': (110.0, 130.0), 'seed': 7,
    },
    'vocoder_train': {'segment_frames': 60},
}


def tiny_config(overrides: dict | None = None):
    merged = {key: dict(value) for key, value in TEST_OVERRIDES.items()}
    for section, values in (overrides or {}).items():
        merged.setdefault(section, {}).update(values)
    return build_config('tiny', merged)


def build_feature_dir(root: Path, config=None, f0_source: str = 'analytic') -> tuple[Path, Path]:
    """Write a small synthetic corpus under ``root`` and extract its features; returns (corpus, features)."""
    config = config or tiny_config()
    lexicon = default_lexicon()
    utterances = generate_corpus(config.corpus, config.feature, lexicon)
    corpus_dir = write_corpus(utterances, Path(root) / 'corpus', lexicon, config.corpus, config.feature)
    feature_dir = Path(root) / 'features'
    extract_corpus_features(corpus_dir, feature_dir, config.feature, f0_source=f0_source)
    return corpus_dir, feature_dir


def assert_gradients_match(test, loss_fn, params, generator, samples=32, step=1e-6, rtol=1e-3):
    """Central differences against autograd on ``samples`` randomly chosen parameter entries."""
    grads = torch.autograd.grad(loss_fn(), params, allow_unused=True)
    sizes = torch.tensor([p.numel() for p in params], dtype=torch.float64)
    for index in torch.multinomial(sizes, samples, replacement=True, generator=generator).tolist():
        param, grad = params[index], grads[index]
        flat = int(torch.randint(param.numel(), (1,), generator=generator))
        analytic = 0.0 if grad is None else float(grad.reshape(-1)[flat])
        original = float(param.reshape(-1)[flat])
        values = []
        for shifted in (original + step, original - step):
            with torch.no_grad():
                param.view(-1)[flat] = shifted
            values.append(float(loss_fn()))
        with torch.no_grad():
            param.view(-1)[flat] = original
        numeric = (values[0] - values[1]) / (2 * step)
        test.assertLessEqual(
            abs(numeric - analytic), rtol * max(abs(numeric), abs(analytic)) + 1e-7,
            f'parameter {index}[{flat}]: numeric {numeric}, autograd {analytic}',
        )


def sine(freq: float, seconds: float, sample_rate: int = 48000, amplitude: float = 0.5) -> Waveform:
    t = np.arange(round(seconds * sample_rate)) / sample_rate
    return Waveform(amplitude * np.sin(2 * np.pi * freq * t), sample_rate)
