import json
import math
import shutil
import tempfile
from pathlib import Path

import torch
from django.test import SimpleTestCase

from voicesynth.checkpoints import load_checkpoint
from voicesynth.config import AcousticTrainSpec, VocoderTrainSpec
from voicesynth.dataset import FeatureCorpus
from voicesynth.exceptions import CheckpointError, DataError
from voicesynth.trainer import AcousticTrainer, VocoderTrainer, adversarial_gate, lr_at_step, train
from voicesynth.tests.utils import build_feature_dir, tiny_config


def snapshot(module):
    return [p.detach().clone() for p in module.parameters()]


class ScheduleTests(SimpleTestCase):

    def test_vocoder_halves_every_decay_interval(self):
        spec = VocoderTrainSpec()
        self.assertEqual(lr_at_step(spec, 0), 1e-4)
        self.assertEqual(lr_at_step(spec, 199999), 1e-4)
        self.assertEqual(lr_at_step(spec, 200000), 5e-5)
        self.assertEqual(lr_at_step(spec, 399999), 5e-5)
        self.assertEqual(lr_at_step(spec, 400000), 2.5e-5)

    def test_acoustic_warmup_then_inverse_sqrt(self):
        spec = AcousticTrainSpec()
        self.assertEqual(lr_at_step(spec, 0), 0.0)
        peak = lr_at_step(spec, 4000)
        self.assertAlmostEqual(peak, 384 ** -0.5 * 4000 ** -0.5)
        self.assertLess(lr_at_step(spec, 2000), peak)
        self.assertLess(lr_at_step(spec, 6000), peak)
        self.assertAlmostEqual(lr_at_step(spec, 16000), peak / 2)
        with self.assertRaises(ValueError):
            lr_at_step(spec, -1)

    def test_adversarial_gate(self):
        acoustic, vocoder = AcousticTrainSpec(), VocoderTrainSpec()
        self.assertFalse(adversarial_gate(acoustic, 9999))
        self.assertTrue(adversarial_gate(acoustic, 10000))
        self.assertFalse(adversarial_gate(vocoder, 99999))
        self.assertTrue(adversarial_gate(vocoder, 100000))

    def test_gate_must_open_inside_the_run(self):
        with self.assertRaises(ValueError):
            AcousticTrainSpec(steps=100, adv_start_step=100)


class TrainerTestCase(SimpleTestCase):
    """Shares one small feature directory across a test class."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = Path(tempfile.mkdtemp())
        cls.corpus_dir, cls.feature_dir = build_feature_dir(cls.tmp)
        cls.corpus = FeatureCorpus(cls.feature_dir)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)
        super().tearDownClass()

    def out(self, name):
        return self.tmp / 'runs' / self._testMethodName / name

    def acoustic(self, name='run', seed=5, adv_start=3, **options):
        config = tiny_config({'acoustic_train': {'adv_start_step': adv_start, 'batch_size': 2}})
        return AcousticTrainer(config, self.corpus, self.out(name), seed=seed, **options)

    def vocoder(self, name='run', seed=5, adv_start=0, **options):
        config = tiny_config({'vocoder_train': {'adv_start_step': adv_start}})
        return VocoderTrainer(config, self.corpus, self.out(name), seed=seed, **options)


class AcousticTrainerTests(TrainerTestCase):

    def test_feature_config_must_match(self):
        config = tiny_config({'feature': {'f0_tracker': 'pyin'}})
        with self.assertRaises(DataError):
            AcousticTrainer(config, self.corpus, self.out('run'))

    def test_same_seed_same_run(self):
        first, second = self.acoustic('a'), self.acoustic('b')
        first.run(10)
        second.run(10)
        self.assertEqual(first.history, second.history)
        for a, b in zip(first.model.parameters(), second.model.parameters()):
            self.assertTrue(torch.equal(a, b))
        lines = (self.out('a') / 'metrics.jsonl').read_text().splitlines()
        self.assertEqual([json.loads(line)['step'] for line in lines], list(range(10)))

    def test_resume_matches_uninterrupted_run(self):
        straight = self.acoustic('straight')
        straight.run(12)
        halfway = self.acoustic('first_half')
        checkpoint = halfway.run(6)
        resumed = self.acoustic('second_half')
        resumed.restore(checkpoint)
        self.assertEqual(resumed.state.step, 6)
        resumed.run(12)
        self.assertEqual(resumed.state.step, 12)
        for a, b in zip(straight.model.parameters(), resumed.model.parameters()):
            torch.testing.assert_close(b, a, atol=1e-6, rtol=0)
        for a, b in zip(straight.discriminator.parameters(), resumed.discriminator.parameters()):
            torch.testing.assert_close(b, a, atol=1e-6, rtol=0)
        for a, b in zip(straight.history[6:], resumed.history):
            self.assertAlmostEqual(a['total'], b['total'], places=5)

    def test_closed_gate_leaves_discriminators_untouched(self):
        trainer = self.acoustic(adv_start=100)
        before = snapshot(trainer.discriminator)
        trainer.run(3)
        for b, a in zip(before, trainer.discriminator.parameters()):
            self.assertTrue(torch.equal(b, a))
        self.assertTrue(all(losses['adv'] == 0.0 for losses in trainer.history))
        self.assertTrue(all('disc' not in losses for losses in trainer.history))

    def test_open_gate_updates_discriminators(self):
        trainer = self.acoustic(adv_start=0)
        before = snapshot(trainer.discriminator)
        trainer.run(2)
        changed = [not torch.equal(b, a) for b, a in zip(before, trainer.discriminator.parameters())]
        self.assertTrue(any(changed))
        self.assertIn('disc_band0', trainer.history[-1])
        self.assertGreater(trainer.history[-1]['adv'], 0.0)

    def test_optimizers_own_disjoint_parameters(self):
        trainer = self.acoustic()
        generator_ids = {id(p) for group in trainer.optimizer.param_groups for p in group['params']}
        disc_ids = {id(p) for group in trainer.disc_optimizer.param_groups for p in group['params']}
        self.assertFalse(generator_ids & disc_ids)
        self.assertEqual(generator_ids, {id(p) for p in trainer.model.parameters()})

    def test_checkpoint_callback_once_per_save(self):
        calls = []
        trainer = self.acoustic(checkpoint_every=2, on_checkpoint=lambda step, path: calls.append(step))
        path = trainer.run(4)
        self.assertEqual(calls, [2, 4])
        self.assertEqual(path, trainer.checkpoint_path)
        self.assertTrue(math.isfinite(trainer.state.loss_ema['total']))

    def test_train_returns_checkpoint_and_rejects_foreign_resume(self):
        config = tiny_config({'acoustic_train': {'batch_size': 2}})
        path = train('acoustic', config, self.feature_dir, self.out('run'), seed=1, steps=2)
        self.assertTrue(path.is_file())
        with self.assertRaises(CheckpointError):
            train('vocoder', tiny_config(), self.feature_dir, self.out('voc'), resume=path, steps=1)
        other = tiny_config({'acoustic_train': {'batch_size': 3}})
        with self.assertRaises(CheckpointError):
            train('acoustic', other, self.feature_dir, self.out('other'), resume=path, steps=3)


class VocoderTrainerTests(TrainerTestCase):

    def test_same_seed_same_run(self):
        first, second = self.vocoder('a'), self.vocoder('b')
        first.run(3)
        second.run(3)
        self.assertEqual(first.history, second.history)
        for a, b in zip(first.model.parameters(), second.model.parameters()):
            self.assertTrue(torch.equal(a, b))
        self.assertIn('disc', first.history[0])
        self.assertEqual(first.history[0]['lr'], 1e-3)

    def test_closed_gate_trains_on_stft_loss_only(self):
        trainer = self.vocoder(adv_start=100)
        before = snapshot(trainer.discriminator)
        trainer.run(2)
        for b, a in zip(before, trainer.discriminator.parameters()):
            self.assertTrue(torch.equal(b, a))
        self.assertTrue(all(losses['total'] == losses['stft'] for losses in trainer.history))


class DisabledDiscriminatorTests(TrainerTestCase):

    def assert_reconstruction_only(self, trainer):
        self.assertIsNone(trainer.disc_optimizer)
        checkpoint = trainer.run(2)
        self.assertTrue(all(losses['adv'] == 0.0 for losses in trainer.history))
        self.assertTrue(all('disc' not in losses for losses in trainer.history))
        self.assertIsNone(load_checkpoint(checkpoint)['disc_optimizer'])
        return checkpoint

    def test_acoustic_without_bands(self):
        config = tiny_config({
            'sf_discriminator': {'bands': []},
            'acoustic_train': {'adv_start_step': 0, 'batch_size': 2},
        })
        trainer = AcousticTrainer(config, self.corpus, self.out('run'), seed=5)
        self.assertEqual(trainer.discriminator.n_bands, 0)
        checkpoint = self.assert_reconstruction_only(trainer)
        resumed = AcousticTrainer(config, self.corpus, self.out('resumed'), seed=5)
        resumed.restore(checkpoint)
        resumed.run(3)
        self.assertEqual(resumed.state.step, 3)

    def test_vocoder_without_crops(self):
        config = tiny_config({
            'ml_discriminator': {'crops': {'lengths_s': []}},
            'vocoder_train': {'adv_start_step': 0},
        })
        trainer = VocoderTrainer(config, self.corpus, self.out('run'), seed=5)
        self.assertFalse(trainer.discriminator.enabled)
        checkpoint = self.assert_reconstruction_only(trainer)
        self.assertTrue(all(losses['total'] == losses['stft'] for losses in trainer.history))
        resumed = VocoderTrainer(config, self.corpus, self.out('resumed'), seed=5)
        resumed.restore(checkpoint)
        self.assertEqual(resumed.state.step, 2)
