import hashlib
import json
from importlib import metadata
from pathlib import Path

import django
import numpy as np
import scipy
from django.conf import settings
from django.core.serializers.json import DjangoJSONEncoder
from django.db import models
from django.utils import timezone


def config_digest(path):
    """SHA-256 of the config file exactly as read."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def module_versions():
    try:
        realens = metadata.version("realens")
    except metadata.PackageNotFoundError:
        realens = "unknown"
    return {"realens": realens, "django": django.get_version(), "numpy": np.__version__, "scipy": scipy.__version__}


class Experiment(models.Model):
    """
    One invocation of an experiment command.

    The row is created (status running) before any output is written and is
    mirrored to manifest.json in the output directory, so a failed run always
    leaves a manifest saying so.
    """

    class Status(models.TextChoices):
        RUNNING = "running", "Running"
        SUCCEEDED = "succeeded", "Succeeded"
        FAILED = "failed", "Failed"

    command = models.CharField(max_length=32)
    config_path = models.TextField()
    config_digest = models.CharField(max_length=64)

    # Seeds span the full unsigned 64-bit range, beyond what an IntegerField stores everywhere.
    seed = models.CharField(max_length=20)
    workers = models.PositiveIntegerField(default=1)
    schedule = models.JSONField(default=dict, blank=True, encoder=DjangoJSONEncoder)
    module_versions = models.JSONField(default=dict, encoder=DjangoJSONEncoder)
    output_dir = models.TextField()
    outputs = models.JSONField(default=list, blank=True)

    status = models.CharField(max_length=10, choices=Status.choices, default=Status.RUNNING)
    message = models.TextField(blank=True)

    started_at = models.DateTimeField(default=timezone.now)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-started_at"]
        indexes = [
            models.Index(fields=["command", "status"], name="experiment_command_status"),
        ]

    def __str__(self):
        return f"Experiment {self.command} seed={self.seed} ({self.status})"

    @property
    def manifest_path(self):
        return Path(self.output_dir) / settings.REALENS["MANIFEST_NAME"]

    def manifest(self):
        return {
            "command": self.command,
            "config": self.config_path,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "workers": self.workers,
            "schedule": self.schedule,
            "module_versions": self.module_versions,
            "outputs": self.outputs,
            "status": self.status,
            "message": self.message,
            "started_at": self.started_at.isoformat(),
            "finished_at": self.finished_at.isoformat() if self.finished_at else None,
        }

    def write_manifest(self):
        path = self.manifest_path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True, cls=DjangoJSONEncoder) + "\n")
        return path

    def finish(self, status, message="", outputs=None):
        self.status = status
        self.message = message
        if outputs is not None:
            self.outputs = [str(path) for path in outputs]
        self.finished_at = timezone.now()
        self.save(update_fields=["status", "message", "outputs", "finished_at"])
        self.write_manifest()
