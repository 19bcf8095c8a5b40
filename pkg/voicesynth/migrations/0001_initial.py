# Generated by Django 5.2.6 on 2026-10-17 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='CorpusRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(help_text='Directory name of the corpus', max_length=100, unique=True)),
                ('directory', models.CharField(help_text='Absolute path of the corpus directory', max_length=500)),
                ('seed', models.BigIntegerField(help_text='Seed the corpus was generated from')),
                ('spec', models.JSONField(default=dict, help_text='Corpus and feature settings used')),
                ('utterance_count', models.PositiveIntegerField(default=0)),
                ('total_seconds', models.FloatField(default=0.0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Corpus',
                'verbose_name_plural': 'Corpora',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('acoustic', 'Acoustic model'), ('vocoder', 'Vocoder')], max_length=20)),
                ('status', models.CharField(choices=[('running', 'Running'), ('finished', 'Finished'), ('failed', 'Failed')], default='running', max_length=20)),
                ('profile', models.CharField(default='full', max_length=20)),
                ('config', models.JSONField(default=dict, help_text='Full experiment config')),
                ('seed', models.BigIntegerField(default=1234)),
                ('feature_dir', models.CharField(max_length=500)),
                ('output_dir', models.CharField(max_length=500)),
                ('last_step', models.PositiveIntegerField(default=0)),
                ('last_losses', models.JSONField(blank=True, default=dict, help_text='Loss EMA at the last checkpoint')),
                ('error', models.TextField(blank=True)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('corpus', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='runs', to='voicesynth.corpusrecord')),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='CheckpointRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('step', models.PositiveIntegerField()),
                ('path', models.CharField(max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='checkpoints', to='voicesynth.trainingrun')),
            ],
            options={
                'ordering': ['run', 'step'],
                'constraints': [models.UniqueConstraint(fields=('run', 'step'), name='unique_checkpoint_step')],
            },
        ),
        migrations.CreateModel(
            name='EvaluationRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('reference', models.CharField(help_text='Feature directory used as reference', max_length=500)),
                ('prediction', models.CharField(help_text='Prediction directory or checkpoint', max_length=500)),
                ('mel_l1', models.FloatField()),
                ('f0_rmse_cents', models.FloatField()),
                ('vuv_error_rate', models.FloatField()),
                ('spectral_convergence', models.FloatField()),
                ('frames', models.PositiveIntegerField(default=0)),
                ('per_utterance', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='evaluations', to='voicesynth.trainingrun')),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
