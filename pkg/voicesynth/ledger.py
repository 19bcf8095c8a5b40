"""
LEDGER.PY - Writes to the run ledger on behalf of the management commands
"""

import logging
from pathlib import Path

from django.utils import timezone

from .models import CheckpointRecord, CorpusRecord, EvaluationRecord, TrainingRun

logger = logging.getLogger(__name__)


def record_corpus(directory: Path, seed: int, spec: dict, utterance_count: int, total_seconds: float) -> CorpusRecord:
    directory = Path(directory).resolve()
    record, _ = CorpusRecord.objects.update_or_create(
        name=directory.name,
        defaults={
            'directory': str(directory), 'seed': seed, 'spec': spec,
            'utterance_count': utterance_count, 'total_seconds': total_seconds,
        },
    )
    return record


def corpus_for_features(manifest: dict) -> CorpusRecord | None:
    return CorpusRecord.objects.filter(directory=manifest.get('corpus_dir', '')).first()


def start_run(kind: str, config, seed: int, feature_dir: Path, output_dir: Path,
              corpus: CorpusRecord | None = None) -> TrainingRun:
    return TrainingRun.objects.create(
        kind=kind, profile=config.profile, config=config.model_dump(mode='json'), seed=seed,
        corpus=corpus, feature_dir=str(feature_dir), output_dir=str(output_dir),
    )


def record_checkpoint(run: TrainingRun, step: int, path: Path, losses: dict | None = None) -> CheckpointRecord:
    checkpoint, _ = CheckpointRecord.objects.update_or_create(
        run=run, step=step, defaults={'path': str(Path(path).resolve())}
    )
    run.last_step = step
    if losses is not None:
        run.last_losses = losses
    run.save(update_fields=['last_step', 'last_losses'])
    return checkpoint


def finish_run(run: TrainingRun, error: str = '') -> TrainingRun:
    run.status = 'failed' if error else 'finished'
    run.error = error
    run.finished_at = timezone.now()
    run.save(update_fields=['status', 'error', 'finished_at'])
    logger.info('run %s %s at step %d', run.pk, run.status, run.last_step)
    return run


def record_evaluation(report, reference: str, prediction: str, run: TrainingRun | None = None) -> EvaluationRecord:
    aggregate = report.aggregate
    return EvaluationRecord.objects.create(
        run=run, reference=reference, prediction=prediction,
        mel_l1=aggregate.mel_l1, f0_rmse_cents=aggregate.f0_rmse_cents,
        vuv_error_rate=aggregate.vuv_error_rate, spectral_convergence=aggregate.spectral_convergence,
        frames=aggregate.frames,
        per_utterance={name: m.model_dump() for name, m in report.per_utterance.items()},
    )


def run_for_checkpoint(path: Path) -> TrainingRun | None:
    checkpoint = CheckpointRecord.objects.filter(path=str(Path(path).resolve())).order_by('-step').first()
    return checkpoint.run if checkpoint else None
