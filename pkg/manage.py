#!/usr/bin/env python
"""Command-line entry point for the real-ensemble experiments."""
import os
import sys


def main():
    """Run an experiment subcommand (simulate, ode, reference, compare, align, classical)."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'realens.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Is it installed and on your PYTHONPATH? "
            "Run `uv sync` to create the environment."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
