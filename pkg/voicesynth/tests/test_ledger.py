import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

from django.contrib.auth.models import User
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase
from django.urls import reverse

from voicesynth import ledger
from voicesynth.config import build_config
from voicesynth.models import CheckpointRecord, CorpusRecord, EvaluationRecord, TrainingRun
from voicesynth.pipeline import EvalReport, UtteranceMetrics
from voicesynth.tests.utils import TEST_OVERRIDES


def report(mel_l1=0.5):
    metrics = UtteranceMetrics(mel_l1=mel_l1, f0_rmse_cents=12.0, vuv_error_rate=0.05,
                               spectral_convergence=0.3, frames=100)
    return EvalReport.from_metrics({'utt0000': metrics})


class LedgerTests(TestCase):

    def setUp(self):
        self.config = build_config('tiny')

    def test_corpus_is_recorded_once_per_directory(self):
        first = ledger.record_corpus(Path('/data/corpus'), 1, {}, 4, 10.0)
        second = ledger.record_corpus(Path('/data/corpus'), 2, {}, 8, 20.0)
        self.assertEqual(first.pk, second.pk)
        self.assertEqual(CorpusRecord.objects.get().utterance_count, 8)
        self.assertEqual(ledger.corpus_for_features({'corpus_dir': str(Path('/data/corpus').resolve())}), second)
        self.assertIsNone(ledger.corpus_for_features({}))

    def test_run_lifecycle(self):
        run = ledger.start_run('acoustic', self.config, 7, Path('features'), Path('runs/a'))
        self.assertEqual(run.status, 'running')
        self.assertEqual(run.profile, 'tiny')
        ledger.record_checkpoint(run, 1000, Path('runs/a/acoustic_last.pt'), {'total': 1.5})
        ledger.record_checkpoint(run, 2000, Path('runs/a/acoustic_last.pt'), {'total': 1.2})
        ledger.finish_run(run)
        run.refresh_from_db()
        self.assertEqual(run.status, 'finished')
        self.assertEqual(run.last_step, 2000)
        self.assertEqual(run.last_losses, {'total': 1.2})
        self.assertIsNotNone(run.finished_at)
        self.assertEqual(run.latest_checkpoint.step, 2000)
        self.assertEqual(ledger.run_for_checkpoint(Path('runs/a/acoustic_last.pt')), run)
        self.assertIsNone(ledger.run_for_checkpoint(Path('elsewhere.pt')))

    def test_failed_run_keeps_error(self):
        run = ledger.start_run('vocoder', self.config, 7, Path('features'), Path('runs/v'))
        ledger.finish_run(run, error='out of memory')
        run.refresh_from_db()
        self.assertEqual((run.status, run.error), ('failed', 'out of memory'))

    def test_evaluation_record(self):
        record = ledger.record_evaluation(report(), 'features', 'predictions')
        self.assertEqual(record.mel_l1, 0.5)
        self.assertEqual(record.frames, 100)
        self.assertEqual(record.per_utterance['utt0000']['f0_rmse_cents'], 12.0)


class ViewTests(TestCase):

    def setUp(self):
        self.user = User.objects.create_user('engineer', password='secret-pass')
        config = build_config('tiny')
        self.run = ledger.start_run('acoustic', config, 7, Path('features'), Path('runs/a'))
        ledger.record_checkpoint(self.run, 100, Path('runs/a/acoustic_last.pt'), {'total': 2.0})
        self.evaluation = ledger.record_evaluation(report(), 'features', 'runs/a/acoustic_last.pt', run=self.run)

    def test_login_required(self):
        response = self.client.get(reverse('voicesynth:dashboard'))
        self.assertEqual(response.status_code, 302)
        self.assertIn('/admin/login/', response['Location'])

    def test_dashboard(self):
        self.client.force_login(self.user)
        data = self.client.get(reverse('voicesynth:dashboard')).json()
        self.assertEqual(data['runs'], {'running': 1, 'finished': 0, 'failed': 0})
        self.assertEqual(data['evaluations'], 1)
        self.assertEqual(data['latest_runs'][0]['id'], self.run.pk)

    def test_run_detail(self):
        self.client.force_login(self.user)
        data = self.client.get(reverse('voicesynth:run_detail', args=[self.run.pk])).json()
        self.assertEqual(data['kind'], 'acoustic')
        self.assertEqual(data['last_losses'], {'total': 2.0})
        self.assertEqual([c['step'] for c in data['checkpoints']], [100])
        self.assertEqual(data['evaluations'][0]['id'], self.evaluation.pk)

    def test_report_detail(self):
        self.client.force_login(self.user)
        data = self.client.get(reverse('voicesynth:report_detail', args=[self.evaluation.pk])).json()
        self.assertEqual(data['run'], self.run.pk)
        self.assertEqual(data['aggregate']['vuv_error_rate'], 0.05)
        self.assertIn('utt0000', data['per_utterance'])

    def test_missing_objects(self):
        self.client.force_login(self.user)
        self.assertEqual(self.client.get(reverse('voicesynth:run_detail', args=[999])).status_code, 404)
        self.assertEqual(self.client.get(reverse('voicesynth:report_detail', args=[999])).status_code, 404)


class CommandTests(TestCase):
    """The command line flow from corpus generation to synthesis, on the tiny profile."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = Path(tempfile.mkdtemp())
        cls.config_path = cls.tmp / 'config.json'
        cls.config_path.write_text(json.dumps({'profile': 'tiny', **TEST_OVERRIDES}), encoding='utf-8')

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)
        super().tearDownClass()

    def call(self, name, *args):
        out = StringIO()
        call_command(name, *args, '--config', str(self.config_path), '--seed', '7', verbosity=0, stdout=out)
        return out.getvalue()

    def prepare_features(self):
        corpus, features = self.tmp / self._testMethodName / 'corpus', self.tmp / self._testMethodName / 'features'
        self.call('gen_corpus', '--out', str(corpus))
        self.call('extract_features', '--data', str(corpus), '--out', str(features), '--f0-source', 'analytic')
        return corpus, features

    def test_corpus_to_synthesis(self):
        corpus, features = self.prepare_features()
        record = CorpusRecord.objects.get()
        self.assertEqual(record.utterance_count, 3)
        self.assertEqual(record.seed, 7)

        runs = self.tmp / 'runs'
        self.call('train_acoustic', '--data', str(features), '--out', str(runs / 'acoustic'),
                  '--steps', '2', '--checkpoint-every', '1')
        run = TrainingRun.objects.get(kind='acoustic')
        self.assertEqual(run.status, 'finished')
        self.assertEqual(run.corpus, record)
        self.assertEqual(list(run.checkpoints.values_list('step', flat=True)), [1, 2])
        self.call('train_vocoder', '--data', str(features), '--out', str(runs / 'vocoder'), '--steps', '1')
        self.assertEqual(TrainingRun.objects.get(kind='vocoder').last_step, 1)

        acoustic_ckpt = runs / 'acoustic' / 'acoustic_last.pt'
        vocoder_ckpt = runs / 'vocoder' / 'vocoder_last.pt'
        output = self.call('evaluate', '--ref', str(features), '--acoustic', str(acoustic_ckpt))
        evaluation = EvaluationRecord.objects.get()
        self.assertEqual(evaluation.run, run)
        self.assertIn('f0_rmse_cents', output)

        wav = self.tmp / 'out.wav'
        self.call('synthesize', '--score', str(corpus / 'scores' / 'utt0000.json'), '--acoustic',
                  str(acoustic_ckpt), '--vocoder', str(vocoder_ckpt), '--out', str(wav), '--pitch-shift', '2')
        self.assertTrue(wav.is_file())

    def test_toolkit_errors_become_command_errors(self):
        with self.assertRaises(CommandError):
            self.call('train_acoustic', '--data', str(self.tmp / 'missing'), '--out', str(self.tmp / 'x'))
        self.assertFalse(TrainingRun.objects.exists())
        bad_config = self.tmp / 'bad.json'
        bad_config.write_text(json.dumps({'profile': 'huge'}), encoding='utf-8')
        with self.assertRaisesMessage(CommandError, 'unknown profile'):
            call_command('gen_corpus', '--out', str(self.tmp / 'c'), '--config', str(bad_config), verbosity=0)

    def test_failed_resume_marks_run_failed(self):
        _, features = self.prepare_features()
        with self.assertRaises(CommandError):
            self.call('train_acoustic', '--data', str(features), '--out', str(self.tmp / 'r'),
                      '--resume', str(self.tmp / 'nothing.pt'))
        run = TrainingRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertIn('does not exist', run.error)
        self.assertFalse(CheckpointRecord.objects.exists())
