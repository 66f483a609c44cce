"""
Settings for the realens project.

The project has no web surface: Django provides the management commands
(the experiment CLI), configuration and the experiment ledger.
"""

from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

# Required by Django; nothing here is signed or served.
SECRET_KEY = 'realens-offline-experiments'

DEBUG = False

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'ensembles.apps.EnsemblesConfig',
]

# The ledger is small and local, one row per experiment run.
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "experiments.sqlite3",
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "ensembles": {"handlers": ["console"], "level": "INFO", "propagate": False},
    },
}

# Experiment defaults. Everything else comes from the --config JSON document.
REALENS = {
    "DEFAULT_SEED": 0,
    "DEFAULT_WORKERS": 1,
    "DEFAULT_SEEDS": 10,
    "DEFAULT_LADDER": [100, 1000, 10000],
    "CSV_FLOAT_FORMAT": ".17g",
    "MANIFEST_NAME": "manifest.json",
}
