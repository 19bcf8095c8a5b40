"""
VIEWS.PY - Read-only JSON views over the run ledger

Key Concepts:
- Every view requires a logged-in user (staff browse runs after logging in
  through the admin)
- Responses are plain JSON so training progress can be polled from scripts
"""

from django.contrib.auth.decorators import login_required
from django.db.models import Count
from django.http import JsonResponse
from django.shortcuts import get_object_or_404

from .models import CorpusRecord, EvaluationRecord, TrainingRun


def _run_summary(run):
    return {
        'id': run.pk,
        'kind': run.kind,
        'profile': run.profile,
        'status': run.status,
        'last_step': run.last_step,
        'started_at': run.started_at.isoformat(),
        'finished_at': run.finished_at.isoformat() if run.finished_at else None,
    }


def _metrics(record):
    return {
        'mel_l1': record.mel_l1,
        'f0_rmse_cents': record.f0_rmse_cents,
        'vuv_error_rate': record.vuv_error_rate,
        'spectral_convergence': record.spectral_convergence,
        'frames': record.frames,
    }


@login_required
def dashboard(request):
    """Counts of corpora and runs per status, plus the latest runs."""
    by_status = dict(TrainingRun.objects.values_list('status').annotate(n=Count('id')).order_by())
    latest = TrainingRun.objects.all()[:10]
    return JsonResponse({
        'corpora': CorpusRecord.objects.count(),
        'runs': {status: by_status.get(status, 0) for status, _ in TrainingRun.STATUS_CHOICES},
        'evaluations': EvaluationRecord.objects.count(),
        'latest_runs': [_run_summary(run) for run in latest],
    })


@login_required
def run_detail(request, pk):
    run = get_object_or_404(TrainingRun, pk=pk)
    data = _run_summary(run)
    data.update({
        'seed': run.seed,
        'corpus': run.corpus.name if run.corpus else None,
        'output_dir': run.output_dir,
        'last_losses': run.last_losses,
        'error': run.error,
        'checkpoints': [{'step': c.step, 'path': c.path} for c in run.checkpoints.all()],
        'evaluations': [{'id': e.pk, **_metrics(e)} for e in run.evaluations.all()],
    })
    return JsonResponse(data)


@login_required
def report_detail(request, pk):
    record = get_object_or_404(EvaluationRecord, pk=pk)
    return JsonResponse({
        'id': record.pk,
        'run': record.run_id,
        'reference': record.reference,
        'prediction': record.prediction,
        'aggregate': _metrics(record),
        'per_utterance': record.per_utterance,
    })
