"""
MODELS.PY - Run ledger

Corpora, training runs, checkpoints and evaluation reports produced from the
command line are recorded here so they can be browsed in the admin and the
JSON views after the fact. The numeric modules never import this file; the
management commands write to it through ``voicesynth.ledger``.
"""

from django.db import models


class CorpusRecord(models.Model):
    """A generated synthetic corpus on disk."""

    name = models.CharField(max_length=100, unique=True, help_text="Directory name of the corpus")
    directory = models.CharField(max_length=500, help_text="Absolute path of the corpus directory")
    seed = models.BigIntegerField(help_text="Seed the corpus was generated from")
    spec = models.JSONField(default=dict, help_text="Corpus and feature settings used")
    utterance_count = models.PositiveIntegerField(default=0)
    total_seconds = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = "Corpus"
        verbose_name_plural = "Corpora"

    def __str__(self):
        return f"{self.name} ({self.utterance_count} utterances)"


class TrainingRun(models.Model):
    """One invocation of train_acoustic or train_vocoder."""

    KIND_CHOICES = [
        ('acoustic', 'Acoustic model'),
        ('vocoder', 'Vocoder'),
    ]

    STATUS_CHOICES = [
        ('running', 'Running'),
        ('finished', 'Finished'),
        ('failed', 'Failed'),
    ]

    kind = models.CharField(max_length=20, choices=KIND_CHOICES)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    profile = models.CharField(max_length=20, default='full')
    config = models.JSONField(default=dict, help_text="Full experiment config")
    seed = models.BigIntegerField(default=1234)
    corpus = models.ForeignKey(
        CorpusRecord, on_delete=models.SET_NULL, null=True, blank=True, related_name='runs'
    )
    feature_dir = models.CharField(max_length=500)
    output_dir = models.CharField(max_length=500)
    last_step = models.PositiveIntegerField(default=0)
    last_losses = models.JSONField(default=dict, blank=True, help_text="Loss EMA at the last checkpoint")
    error = models.TextField(blank=True)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']

    def __str__(self):
        return f"{self.get_kind_display()} run #{self.pk} ({self.status})"

    @property
    def latest_checkpoint(self):
        return self.checkpoints.order_by('-step').first()


class CheckpointRecord(models.Model):
    run = models.ForeignKey(TrainingRun, on_delete=models.CASCADE, related_name='checkpoints')
    step = models.PositiveIntegerField()
    path = models.CharField(max_length=500)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['run', 'step']
        constraints = [
            models.UniqueConstraint(fields=['run', 'step'], name='unique_checkpoint_step'),
        ]

    def __str__(self):
        return f"{self.run} @ step {self.step}"


class EvaluationRecord(models.Model):
    """Aggregate metrics of one evaluate call; per-utterance rows kept as JSON."""

    run = models.ForeignKey(
        TrainingRun, on_delete=models.SET_NULL, null=True, blank=True, related_name='evaluations'
    )
    reference = models.CharField(max_length=500, help_text="Feature directory used as reference")
    prediction = models.CharField(max_length=500, help_text="Prediction directory or checkpoint")
    mel_l1 = models.FloatField()
    f0_rmse_cents = models.FloatField()
    vuv_error_rate = models.FloatField()
    spectral_convergence = models.FloatField()
    frames = models.PositiveIntegerField(default=0)
    per_utterance = models.JSONField(default=dict)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"Evaluation #{self.pk}: mel L1 {self.mel_l1:.3f}, F0 {self.f0_rmse_cents:.1f} cents"
