# Generated by Django 6.0.1 on 2026-10-18 09:12

import django.core.serializers.json
import django.utils.timezone
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Experiment',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=32)),
                ('config_path', models.TextField()),
                ('config_digest', models.CharField(max_length=64)),
                ('seed', models.CharField(max_length=20)),
                ('workers', models.PositiveIntegerField(default=1)),
                ('schedule', models.JSONField(blank=True, default=dict, encoder=django.core.serializers.json.DjangoJSONEncoder)),
                ('module_versions', models.JSONField(default=dict, encoder=django.core.serializers.json.DjangoJSONEncoder)),
                ('output_dir', models.TextField()),
                ('outputs', models.JSONField(blank=True, default=list)),
                ('status', models.CharField(choices=[('running', 'Running'), ('succeeded', 'Succeeded'), ('failed', 'Failed')], default='running', max_length=10)),
                ('message', models.TextField(blank=True)),
                ('started_at', models.DateTimeField(default=django.utils.timezone.now)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-started_at'],
                'indexes': [models.Index(fields=['command', 'status'], name='experiment_command_status')],
            },
        ),
    ]
