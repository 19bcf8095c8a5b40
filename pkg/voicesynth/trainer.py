"""
TRAINER.PY - Two-stage training loops

The acoustic stage trains the score-to-feature model with Adam on a warm-up
then inverse-square-root schedule; sub-frequency discriminators join at
``adv_start_step``. The vocoder stage trains the waveform generator with
RAdam and a step-halving learning rate; the multi-resolution STFT loss runs
from the first step and multi-length discriminators join at
``adv_start_step``.

Each step updates the generator first, then (when the gate is open) the
discriminators. All randomness comes from the global torch RNG (weights,
dropout) and one ``torch.Generator`` (batches, windows, crops, noise); both
states go into every checkpoint so a resumed run continues bit-exactly.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import torch
import torch.nn as nn
from tqdm import tqdm

from .acoustic import AcousticModel, reconstruction_loss
from .adversarial import frozen
from .checkpoints import load_checkpoint, save_checkpoint
from .config import AcousticTrainSpec, ExperimentConfig, VocoderTrainSpec
from .dataset import FeatureCorpus
from .exceptions import CheckpointError, DataError
from .mlgan import MultiLengthGAN, ml_discriminator_loss, ml_generator_loss
from .sfgan import SubFrequencyGAN, sf_discriminator_loss, sf_generator_loss
from .vocoder import MultiResolutionSTFTLoss, WaveGenerator

logger = logging.getLogger(__name__)

EMA_DECAY = 0.98


# === SCHEDULES ===

def lr_at_step(spec: AcousticTrainSpec | VocoderTrainSpec, step: int) -> float:
    """Learning rate at ``step`` (0-based for the vocoder, 1-based for the warm-up schedule)."""
    if step < 0:
        raise ValueError('step must be non-negative')
    if spec.kind == 'acoustic':
        if step == 0:
            return 0.0
        return spec.d_model ** -0.5 * min(step ** -0.5, step * spec.warmup_steps ** -1.5)
    return spec.lr * spec.lr_decay ** (step // spec.lr_decay_every)


def adversarial_gate(spec: AcousticTrainSpec | VocoderTrainSpec, step: int) -> bool:
    return step >= spec.adv_start_step


# === STATE ===

@dataclass
class TrainState:
    kind: str
    seed: int
    step: int = 0
    loss_ema: dict[str, float] = field(default_factory=dict)
    checkpoint_path: str | None = None

    def update_ema(self, losses: dict[str, float]) -> None:
        for key, value in losses.items():
            previous = self.loss_ema.get(key)
            self.loss_ema[key] = value if previous is None else EMA_DECAY * previous + (1 - EMA_DECAY) * value


def _set_lr(optimizer: torch.optim.Optimizer | None, lr: float) -> None:
    if optimizer is None:
        return
    for group in optimizer.param_groups:
        group['lr'] = lr


def _clip_and_step(optimizer: torch.optim.Optimizer, module: nn.Module, max_norm: float) -> None:
    nn.utils.clip_grad_norm_(module.parameters(), max_norm)
    optimizer.step()


class Trainer:
    """Shared loop: logging, metrics file, checkpoints and resume."""

    kind = ''

    def __init__(self, config: ExperimentConfig, corpus: FeatureCorpus, out_dir: str | Path, seed: int = 1234,
                 device: str = 'cpu', checkpoint_every: int = 1000,
                 on_checkpoint: Callable[[int, Path], None] | None = None, progress: bool = False):
        if corpus.feature != config.feature:
            raise DataError('feature directory was extracted with a different feature config')
        self.config = config
        self.corpus = corpus
        self.out_dir = Path(out_dir)
        self.device = torch.device(device)
        self.checkpoint_every = checkpoint_every
        self.on_checkpoint = on_checkpoint
        self.progress = progress
        torch.manual_seed(seed)
        self.generator = torch.Generator().manual_seed(seed)
        self.state = TrainState(kind=self.kind, seed=seed)
        self.build()

    # subclasses create self.model, self.discriminator, self.optimizer, self.disc_optimizer
    def build(self) -> None:
        raise NotImplementedError

    def train_step(self, step: int) -> dict[str, float]:
        raise NotImplementedError

    @property
    def spec(self):
        raise NotImplementedError

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / f'{self.kind}_last.pt'

    def run(self, steps: int | None = None) -> Path:
        """Train until ``steps`` total steps (default: ``spec.steps``) and checkpoint."""
        target = min(steps or self.spec.steps, self.spec.steps)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        metrics = self.out_dir / 'metrics.jsonl'
        start = self.state.step
        saved_at = None
        self.history: list[dict[str, float]] = []
        with open(metrics, 'a', encoding='utf-8') as log_file, \
                tqdm(total=target - start, desc=self.kind, disable=not self.progress) as bar:
            for step in range(start, target):
                losses = self.train_step(step)
                self.state.step = step + 1
                self.state.update_ema(losses)
                self.history.append(losses)
                log_file.write(json.dumps({'step': step, **losses}) + '\n')
                bar.update(1)
                if step % self.spec.log_every == 0:
                    logger.info('%s step %d: %s', self.kind, step,
                                ', '.join(f'{k}={v:.4f}' for k, v in losses.items()))
                if self.state.step % self.checkpoint_every == 0:
                    self.save()
                    saved_at = self.state.step
        if saved_at == self.state.step:
            return self.checkpoint_path
        return self.save()

    def save(self) -> Path:
        path = save_checkpoint(self.checkpoint_path, self.kind, self.payload())
        self.state.checkpoint_path = str(path)
        if self.on_checkpoint:
            self.on_checkpoint(self.state.step, path)
        return path

    def payload(self) -> dict:
        return {
            'config': self.config.model_dump(mode='json'),
            'norm_stats': self.corpus.stats.to_dict(),
            'lexicon': {k: list(v) for k, v in self.corpus.lexicon.entries.items()},
            'model': self.model.state_dict(),
            'discriminator': self.discriminator.state_dict(),
            'optimizer': self.optimizer.state_dict(),
            'disc_optimizer': self.disc_optimizer.state_dict() if self.disc_optimizer else None,
            'state': asdict(self.state),
            'rng': {'torch': torch.get_rng_state(), 'generator': self.generator.get_state()},
        }

    def restore(self, path: str | Path) -> None:
        blob = load_checkpoint(path, self.kind)
        if blob['config'] != self.config.model_dump(mode='json'):
            raise CheckpointError(f'{path} was trained with a different config')
        self.model.load_state_dict(blob['model'])
        self.discriminator.load_state_dict(blob['discriminator'])
        self.optimizer.load_state_dict(blob['optimizer'])
        if self.disc_optimizer is not None:
            self.disc_optimizer.load_state_dict(blob['disc_optimizer'])
        self.state = TrainState(**blob['state'])
        torch.set_rng_state(blob['rng']['torch'])
        self.generator.set_state(blob['rng']['generator'])
        logger.info('resumed %s training from %s at step %d', self.kind, path, self.state.step)


class AcousticTrainer(Trainer):
    kind = 'acoustic'

    @property
    def spec(self) -> AcousticTrainSpec:
        return self.config.acoustic_train

    def build(self) -> None:
        spec = self.spec
        if len(self.corpus.lexicon) > self.config.acoustic.n_phonemes:
            raise DataError(f'lexicon has {len(self.corpus.lexicon)} phonemes, model only '
                            f'{self.config.acoustic.n_phonemes}')
        self.model = AcousticModel(self.config.acoustic).to(self.device)
        self.discriminator = SubFrequencyGAN(self.config.sf_discriminator, self.config.feature.n_mels).to(self.device)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=0.0, betas=spec.betas, eps=spec.eps)
        disc_params = list(self.discriminator.parameters())
        # a band-less discriminator has nothing to optimize
        self.disc_optimizer = torch.optim.Adam(
            disc_params, lr=0.0, betas=spec.betas, eps=spec.eps
        ) if disc_params else None

    def train_step(self, step: int) -> dict[str, float]:
        spec = self.spec
        self.model.train()
        records = self.corpus.pick(spec.batch_size, self.generator)
        batch = self.corpus.acoustic_batch(records, self.config.acoustic.max_duration_frames)
        batch = type(batch)(**{k: v.to(self.device) for k, v in vars(batch).items()})
        lr = lr_at_step(spec, step + 1)
        _set_lr(self.optimizer, lr)
        _set_lr(self.disc_optimizer, lr)
        gate = adversarial_gate(spec, step) and self.discriminator.n_bands > 0

        pred = self.model(batch.phoneme_ids, batch.pitch_ids, batch.duration_ids, batch.phoneme_mask,
                          durations=batch.durations)
        terms = reconstruction_loss(pred, batch.mel, batch.f0, batch.vuv, batch.durations, batch.phoneme_mask)
        total = (terms['mel_l1'] + spec.f0_weight * terms['f0_l2_voiced']
                 + spec.vuv_weight * terms['vuv_bce'] + spec.duration_weight * terms['dur_mse_log'])
        adv = torch.zeros((), device=self.device)
        if gate:
            with frozen(self.discriminator):
                fake_scores = self.discriminator(pred.mel, batch.frame_lengths, self.generator)
                adv = sf_generator_loss(fake_scores, self.discriminator.n_bands)
            total = total + spec.lambda_adv * adv

        self.optimizer.zero_grad(set_to_none=True)
        total.backward()
        _clip_and_step(self.optimizer, self.model, spec.grad_clip)

        losses = {k: float(v) for k, v in terms.items()}
        losses.update(total=float(total), adv=float(adv), lr=lr)
        if gate:
            real = self.discriminator(batch.mel, batch.frame_lengths, self.generator)
            fake = self.discriminator(pred.mel.detach(), batch.frame_lengths, self.generator)
            per_band = sf_discriminator_loss(real, fake)
            disc_total = sum(per_band)
            self.disc_optimizer.zero_grad(set_to_none=True)
            disc_total.backward()
            _clip_and_step(self.disc_optimizer, self.discriminator, spec.grad_clip)
            losses['disc'] = float(disc_total)
            losses.update({f'disc_band{i}': float(v) for i, v in enumerate(per_band)})
        return losses


class VocoderTrainer(Trainer):
    kind = 'vocoder'

    @property
    def spec(self) -> VocoderTrainSpec:
        return self.config.vocoder_train

    def build(self) -> None:
        spec = self.spec
        self.model = WaveGenerator(self.config.vocoder).to(self.device)
        self.discriminator = MultiLengthGAN(self.config.ml_discriminator).to(self.device)
        self.stft_loss = MultiResolutionSTFTLoss()
        self.optimizer = torch.optim.RAdam(self.model.parameters(), lr=spec.lr)
        disc_params = list(self.discriminator.parameters())
        self.disc_optimizer = torch.optim.RAdam(disc_params, lr=spec.lr) if disc_params else None

    def train_step(self, step: int) -> dict[str, float]:
        spec, cfg = self.spec, self.config.vocoder
        self.model.train()
        records = self.corpus.pick(spec.batch_size, self.generator)
        batch = self.corpus.vocoder_batch(records, cfg, spec.segment_frames, self.generator)
        cond, audio = batch.cond.to(self.device), batch.audio.to(self.device)
        noise = torch.randn(audio.size(0), 1, audio.size(1), generator=self.generator).to(self.device)
        lr = lr_at_step(spec, step)
        _set_lr(self.optimizer, lr)
        _set_lr(self.disc_optimizer, lr)
        gate = adversarial_gate(spec, step) and self.discriminator.enabled

        fake = self.model(noise, cond)
        stft = self.stft_loss(fake, audio)
        total = stft
        adv = torch.zeros((), device=self.device)
        starts = None
        if gate:
            starts = self.discriminator.sample_starts(audio, self.generator)
            with frozen(self.discriminator):
                scores = self.discriminator(fake, starts)
            if scores:
                adv = ml_generator_loss(scores)
                total = total + spec.lambda_adv * adv

        self.optimizer.zero_grad(set_to_none=True)
        total.backward()
        _clip_and_step(self.optimizer, self.model, spec.grad_clip)

        losses = {'stft': float(stft), 'adv': float(adv), 'total': float(total), 'lr': lr}
        if gate:
            real_scores = self.discriminator(audio, starts)
            fake_scores = self.discriminator(fake.detach(), starts)
            if real_scores:
                per_length = ml_discriminator_loss(real_scores, fake_scores)
                disc_total = sum(per_length)
                self.disc_optimizer.zero_grad(set_to_none=True)
                disc_total.backward()
                _clip_and_step(self.disc_optimizer, self.discriminator, spec.grad_clip)
                losses['disc'] = float(disc_total)
        return losses


TRAINERS = {'acoustic': AcousticTrainer, 'vocoder': VocoderTrainer}


def train(kind: str, config: ExperimentConfig, feature_dir: str | Path, out_dir: str | Path, seed: int = 1234,
          resume: str | Path | None = None, steps: int | None = None, **options) -> Path:
    """Build the trainer for ``kind``, optionally resume, run, and return the last checkpoint."""
    trainer = TRAINERS[kind](config, FeatureCorpus(feature_dir), out_dir, seed=seed, **options)
    if resume:
        trainer.restore(resume)
    path = trainer.run(steps)
    logger.info('%s training finished at step %d (%s)', kind, trainer.state.step, path)
    return path


def train_acoustic(config: ExperimentConfig, feature_dir, out_dir, **options) -> Path:
    return train('acoustic', config, feature_dir, out_dir, **options)


def train_vocoder(config: ExperimentConfig, feature_dir, out_dir, **options) -> Path:
    return train('vocoder', config, feature_dir, out_dir, **options)
