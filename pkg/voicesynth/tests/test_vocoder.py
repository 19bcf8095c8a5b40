import numpy as np
import torch
from django.test import SimpleTestCase

from voicesynth.adversarial import frozen
from voicesynth.config import CropSpec, MLDiscriminatorConfig, VocoderConfig
from voicesynth.exceptions import ContractError, DomainError
from voicesynth.features import AcousticFeatures, Waveform
from voicesynth.mlgan import MultiLengthGAN, ml_generator_loss
from voicesynth.tests.utils import assert_gradients_match
from voicesynth.vocoder import (
    ConditioningUpsampler, MultiResolutionSTFTLoss, WaveGenerator, build_conditioning, multires_stft_loss,
    receptive_field, upsample_conditioning,
)

NARROW = {'residual_channels': 4, 'gate_channels': 8, 'skip_channels': 4}


def narrow_generator(**overrides):
    torch.manual_seed(0)
    return WaveGenerator(VocoderConfig(**{**NARROW, **overrides}))


class ReceptiveFieldTests(SimpleTestCase):

    def test_closed_form(self):
        self.assertEqual(receptive_field(VocoderConfig()), 36829)
        self.assertEqual(receptive_field(VocoderConfig(kernel=9)), 24553)
        self.assertEqual(receptive_field(VocoderConfig(kernel=3, n_stacks=1, n_layers_per_stack=1)), 3)

    def test_measured_support_matches_closed_form(self):
        model = narrow_generator(skip_channels=16).double()
        rf = receptive_field(model.cfg)
        n = rf + 2000
        centre = n // 2
        noise = torch.randn(1, 1, n, dtype=torch.float64, requires_grad=True)
        cond = torch.randn(1, model.cfg.aux_dims, n, dtype=torch.float64)
        model.generate(noise, cond)[0, centre].backward()
        touched = torch.nonzero(noise.grad[0, 0]).flatten()
        self.assertEqual(int(touched.min()), centre - (rf - 1) // 2)
        self.assertEqual(int(touched.max()), centre + (rf - 1) // 2)


class GeneratorTests(SimpleTestCase):

    def setUp(self):
        self.model = narrow_generator(n_stacks=1, n_layers_per_stack=4).eval()

    def test_output_length_is_frames_times_hop(self):
        for frames in range(1, 101):
            cond = torch.randn(1, frames, 82)
            noise = torch.randn(1, 1, frames * 240)
            with torch.no_grad():
                out = self.model(noise, cond)
            self.assertEqual(tuple(out.shape), (1, frames * 240))
            self.assertLess(float(out.abs().max()), 1.0)

    def test_deterministic_given_noise(self):
        cond, noise = torch.randn(2, 10, 82), torch.randn(2, 1, 2400)
        with torch.no_grad():
            self.assertTrue(torch.equal(self.model(noise, cond), self.model(noise, cond)))

    def test_length_mismatch(self):
        with self.assertRaises(ContractError):
            self.model.generate(torch.randn(1, 1, 100), torch.randn(1, 82, 99))
        with self.assertRaises(ContractError):
            self.model(torch.randn(1, 1, 2400), torch.randn(1, 10, 81))

    def test_symmetric_kernels_commute_with_time_reversal(self):
        model = narrow_generator(n_stacks=2, n_layers_per_stack=3).double().eval()
        with torch.no_grad():
            for block in model.blocks:
                block.dilated.weight.copy_(0.5 * (block.dilated.weight + block.dilated.weight.flip(-1)))
            noise = torch.randn(1, 1, 3000, dtype=torch.float64)
            cond = torch.randn(1, 82, 3000, dtype=torch.float64)
            forward = model.generate(noise, cond)
            backward = model.generate(noise.flip(-1), cond.flip(-1))
        torch.testing.assert_close(backward.flip(-1), forward, atol=1e-4, rtol=0)

    def test_vocode_returns_waveform(self):
        wave = self.model.vocode(np.zeros((12, 82), dtype=np.float32), 48000, torch.Generator().manual_seed(0))
        self.assertIsInstance(wave, Waveform)
        self.assertEqual(len(wave), 12 * 240)


class ConditioningTests(SimpleTestCase):

    def normalized(self, frames=6):
        vuv = np.array([1, 0] * (frames // 2))
        return AcousticFeatures(mel=np.ones((frames, 80)), f0=np.where(vuv > 0, 0.5, 0.0) + 0.1 * (1 - vuv),
                                vuv=vuv, normalized=True)

    def test_layout(self):
        cond = build_conditioning(self.normalized())
        self.assertEqual(cond.shape, (6, 82))
        self.assertEqual(cond[:, 81].tolist(), [1, 0, 1, 0, 1, 0])
        self.assertEqual(cond[:, 80].tolist(), [0.5, 0.0, 0.5, 0.0, 0.5, 0.0])
        self.assertEqual(build_conditioning(self.normalized(), use_f0=False).shape, (6, 81))

    def test_requires_normalized_features(self):
        feats = self.normalized()
        raw = AcousticFeatures(mel=feats.mel, f0=feats.f0, vuv=feats.vuv)
        with self.assertRaises(ContractError):
            build_conditioning(raw)

    def test_upsampling(self):
        upsampler = ConditioningUpsampler(VocoderConfig())
        cond = torch.as_tensor(build_conditioning(self.normalized(10))).unsqueeze(0)
        with torch.no_grad():
            out = upsample_conditioning(cond, upsampler)
        self.assertEqual(tuple(out.shape), (1, 82, 2400))
        expected = torch.tensor([1.0, 0.0] * 5).repeat_interleave(240)
        self.assertTrue(torch.equal(out[0, -1], expected))

    def test_upsampling_errors(self):
        upsampler = ConditioningUpsampler(VocoderConfig())
        with self.assertRaises(DomainError):
            upsampler(torch.zeros(1, 0, 82))
        with self.assertRaises(ContractError):
            upsampler(torch.zeros(1, 4, 80))


class MultiResolutionSTFTLossTests(SimpleTestCase):

    def setUp(self):
        t = np.arange(24000) / 48000
        self.tone = 0.5 * np.sin(2 * np.pi * 440.0 * t)

    def test_zero_for_identical_and_negated_signals(self):
        self.assertEqual(float(multires_stft_loss(self.tone, self.tone)), 0.0)
        self.assertAlmostEqual(float(multires_stft_loss(-self.tone, self.tone)), 0.0, places=6)

    def test_noise_against_tone(self):
        noise = np.random.default_rng(0).standard_normal(24000)
        noise *= 0.5 / np.abs(noise).max()
        self.assertGreater(float(multires_stft_loss(Waveform(noise), Waveform(self.tone))), 1.0)

    def test_differentiable_and_batched(self):
        pred = torch.randn(2, 4800, requires_grad=True)
        MultiResolutionSTFTLoss()(pred, torch.randn(2, 4800)).backward()
        self.assertTrue(torch.isfinite(pred.grad).all())

    def test_length_mismatch(self):
        with self.assertRaises(ContractError):
            multires_stft_loss(np.zeros(4800), np.zeros(4801))


class GeneratorGradientCheckTests(SimpleTestCase):
    """Finite differences against autograd on STFT loss plus the multi-length generator term."""

    def test_sampled_parameters(self):
        model = narrow_generator(n_stacks=1, n_layers_per_stack=3, kernel=5).double()
        torch.manual_seed(1)
        gan = MultiLengthGAN(MLDiscriminatorConfig(
            crops=CropSpec(lengths_s=(0.025, 0.05)), n_layers=2, channels=4,
        )).double()
        gen = torch.Generator().manual_seed(2)
        cond = torch.randn(1, 10, 82, generator=gen, dtype=torch.float64)
        noise = torch.randn(1, 1, 2400, generator=gen, dtype=torch.float64)
        target = 0.3 * torch.sin(torch.arange(2400, dtype=torch.float64) * 0.05).unsqueeze(0)
        starts = gan.sample_starts(target, gen)
        stft = MultiResolutionSTFTLoss()

        def total_loss():
            fake = model(noise, cond)
            with frozen(gan):
                adv = ml_generator_loss(gan(fake, starts))
            return stft(fake, target) + 4.0 * adv

        assert_gradients_match(self, total_loss, list(model.parameters()), gen)
