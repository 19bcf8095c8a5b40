import shutil
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from voicesynth.checkpoints import check_compatible, load_checkpoint
from voicesynth.dataset import FeatureCorpus
from voicesynth.exceptions import CompatibilityError, DataError
from voicesynth.features import AcousticFeatures, Waveform
from voicesynth.pipeline import (
    EvalReport, UtteranceMetrics, copy_synthesize, evaluate, evaluate_acoustic, evaluate_directories,
    f0_rmse_cents, load_vocoder, synthesize,
)
from voicesynth.score import REST_PITCH_ID, load_score
from voicesynth.trainer import train
from voicesynth.tests.utils import build_feature_dir, tiny_config


def features(frames=100, f0=220.0, seed=0):
    rng = np.random.default_rng(seed)
    return AcousticFeatures(mel=rng.normal(-4.0, 1.0, (frames, 80)), f0=np.full(frames, f0),
                            vuv=np.ones(frames, dtype=np.int64))


class EvaluateTests(SimpleTestCase):

    def test_self_comparison_is_zero(self):
        ref = features()
        metrics = evaluate(ref, ref)
        self.assertEqual(metrics.mel_l1, 0.0)
        self.assertEqual(metrics.f0_rmse_cents, 0.0)
        self.assertEqual(metrics.vuv_error_rate, 0.0)
        self.assertEqual(metrics.spectral_convergence, 0.0)
        self.assertEqual(metrics.frames, 100)

    def test_one_semitone_is_a_hundred_cents(self):
        ref = features()
        sharp = AcousticFeatures(mel=ref.mel, f0=ref.f0 * 2 ** (1 / 12), vuv=ref.vuv)
        self.assertAlmostEqual(evaluate(sharp, ref).f0_rmse_cents, 100.0, places=6)

    def test_vuv_flips(self):
        ref = features()
        vuv = ref.vuv.copy()
        vuv[::10] = 0
        flipped = AcousticFeatures(mel=ref.mel, f0=np.where(vuv > 0, ref.f0, 0.0), vuv=vuv)
        metrics = evaluate(flipped, ref)
        self.assertAlmostEqual(metrics.vuv_error_rate, 0.10)
        self.assertEqual(metrics.f0_rmse_cents, 0.0)

    def test_truncates_to_shorter_sequence(self):
        ref = features(100)
        longer = AcousticFeatures(mel=np.vstack([ref.mel, np.zeros((20, 80))]), f0=np.full(120, 220.0),
                                  vuv=np.ones(120, dtype=np.int64))
        metrics = evaluate(longer, ref)
        self.assertEqual(metrics.frames, 100)
        self.assertEqual(metrics.mel_l1, 0.0)

    def test_invalid_inputs(self):
        ref = features()
        with self.assertRaises(DataError):
            evaluate(ref.truncate(0), ref)
        normalized = AcousticFeatures(mel=ref.mel, f0=ref.f0, vuv=ref.vuv, normalized=True)
        with self.assertRaises(DataError):
            evaluate(normalized, ref)

    def test_rmse_without_shared_voicing(self):
        f0 = np.array([200.0, 0.0])
        self.assertEqual(f0_rmse_cents(f0, f0[::-1], np.array([1, 0]), np.array([0, 1])), 0.0)

    def test_report_aggregates_by_mean(self):
        a = UtteranceMetrics(mel_l1=1.0, f0_rmse_cents=10.0, vuv_error_rate=0.0, spectral_convergence=0.5, frames=10)
        b = UtteranceMetrics(mel_l1=3.0, f0_rmse_cents=30.0, vuv_error_rate=0.2, spectral_convergence=0.1, frames=30)
        report = EvalReport.from_metrics({'a': a, 'b': b})
        self.assertEqual(report.aggregate.mel_l1, 2.0)
        self.assertEqual(report.aggregate.f0_rmse_cents, 20.0)
        self.assertAlmostEqual(report.aggregate.vuv_error_rate, 0.1)
        self.assertEqual(report.aggregate.frames, 40)
        with self.assertRaises(DataError):
            EvalReport.from_metrics({})


class CompatibilityTests(SimpleTestCase):

    def blob(self, mean=0.0):
        return {
            'config': tiny_config().model_dump(mode='json'),
            'norm_stats': {'mel_mean': [mean] * 80, 'mel_std': [1.0] * 80, 'f0_mean': 60.0, 'f0_std': 2.0},
        }

    def test_matching_checkpoints(self):
        check_compatible(self.blob(), self.blob())

    def test_different_statistics(self):
        with self.assertRaisesMessage(CompatibilityError, 'normalization statistics differ'):
            check_compatible(self.blob(), self.blob(mean=1.0))


class SynthesisTests(SimpleTestCase):
    """End to end on briefly trained tiny models; checks shapes and plumbing, not quality."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = Path(tempfile.mkdtemp())
        cls.corpus_dir, cls.feature_dir = build_feature_dir(cls.tmp)
        cls.corpus = FeatureCorpus(cls.feature_dir)
        config = tiny_config({'acoustic_train': {'batch_size': 2}})
        cls.acoustic = train('acoustic', config, cls.feature_dir, cls.tmp / 'acoustic', seed=1, steps=2)
        cls.vocoder = train('vocoder', config, cls.feature_dir, cls.tmp / 'vocoder', seed=1, steps=2)
        cls.score_path = cls.corpus_dir / 'scores' / 'utt0000.json'

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)
        super().tearDownClass()

    def test_score_to_waveform(self):
        result = synthesize(self.score_path, self.acoustic, self.vocoder, seed=3)
        self.assertIsInstance(result.waveform, Waveform)
        self.assertEqual(result.waveform.sample_rate, 48000)
        self.assertEqual(len(result.waveform), result.features.n_frames * 240)
        self.assertGreaterEqual(result.features.n_frames, len(result.sequence.phoneme_ids))
        self.assertFalse(result.features.normalized)
        again = synthesize(self.score_path, self.acoustic, self.vocoder, seed=3)
        self.assertTrue(np.array_equal(again.waveform.samples, result.waveform.samples))

    def test_pitch_shift_transposes_the_score(self):
        plain = synthesize(self.score_path, self.acoustic, self.vocoder)
        shifted = synthesize(self.score_path, self.acoustic, self.vocoder, pitch_shift=4)
        sung = plain.sequence.pitch_ids != REST_PITCH_ID
        self.assertTrue(np.array_equal(shifted.sequence.pitch_ids[sung], plain.sequence.pitch_ids[sung] + 4))
        self.assertTrue(np.array_equal(shifted.sequence.pitch_ids[~sung], plain.sequence.pitch_ids[~sung]))

    def test_accepts_parsed_score(self):
        result = synthesize(load_score(self.score_path), self.acoustic, self.vocoder)
        self.assertGreater(len(result.waveform), 0)

    def test_copy_synthesis_length(self):
        vocoder, _ = load_vocoder(self.vocoder)
        record = self.corpus.records[0]
        wave = copy_synthesize(record, self.corpus, vocoder)
        self.assertEqual(len(wave), record.features.n_frames * 240)

    def test_evaluate_acoustic_covers_corpus(self):
        report = evaluate_acoustic(self.acoustic, self.corpus)
        self.assertEqual(sorted(report.per_utterance), sorted(self.corpus.names))
        self.assertGreater(report.aggregate.frames, 0)

    def test_evaluate_directories(self):
        pred_dir = self.tmp / 'predictions'
        pred_dir.mkdir(exist_ok=True)
        with self.assertRaises(DataError):
            evaluate_directories(pred_dir, self.corpus)
        record = self.corpus.records[0]
        record.save(pred_dir / f'{record.name}.npz')
        report = evaluate_directories(pred_dir, self.corpus)
        self.assertEqual(list(report.per_utterance), [record.name])
        self.assertEqual(report.aggregate.mel_l1, 0.0)
        self.assertEqual(report.aggregate.f0_rmse_cents, 0.0)

    def test_checkpoints_share_statistics(self):
        check_compatible(load_checkpoint(self.acoustic), load_checkpoint(self.vocoder))
