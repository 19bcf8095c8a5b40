from django.contrib import admin
from .models import CorpusRecord, TrainingRun, CheckpointRecord, EvaluationRecord


@admin.register(CorpusRecord)
class CorpusRecordAdmin(admin.ModelAdmin):
    list_display = ('name', 'seed', 'utterance_count', 'total_seconds', 'created_at')
    search_fields = ('name', 'directory')
    list_filter = ('created_at',)
    readonly_fields = ('created_at',)


class CheckpointInline(admin.TabularInline):
    model = CheckpointRecord
    extra = 0
    readonly_fields = ('step', 'path', 'created_at')


@admin.register(TrainingRun)
class TrainingRunAdmin(admin.ModelAdmin):
    list_display = ('pk', 'kind', 'profile', 'status', 'last_step', 'corpus', 'started_at', 'finished_at')
    list_filter = ('kind', 'status', 'profile', 'started_at')
    search_fields = ('output_dir', 'feature_dir', 'error')
    readonly_fields = ('started_at', 'finished_at')
    inlines = [CheckpointInline]

    fieldsets = (
        ('Run', {
            'fields': ('kind', 'profile', 'status', 'seed', 'corpus')
        }),
        ('Paths', {
            'fields': ('feature_dir', 'output_dir')
        }),
        ('Progress', {
            'fields': ('last_step', 'last_losses', 'error')
        }),
        ('Configuration', {
            'fields': ('config',),
            'classes': ('collapse',)
        }),
        ('Metadata', {
            'fields': ('started_at', 'finished_at'),
            'classes': ('collapse',)
        })
    )


@admin.register(CheckpointRecord)
class CheckpointRecordAdmin(admin.ModelAdmin):
    list_display = ('run', 'step', 'path', 'created_at')
    list_filter = ('run__kind', 'created_at')
    search_fields = ('path',)


@admin.register(EvaluationRecord)
class EvaluationRecordAdmin(admin.ModelAdmin):
    list_display = (
        'pk', 'run', 'mel_l1', 'f0_rmse_cents', 'vuv_error_rate',
        'spectral_convergence', 'frames', 'created_at'
    )
    list_filter = ('created_at', 'run__kind')
    search_fields = ('reference', 'prediction')
    readonly_fields = ('created_at',)
