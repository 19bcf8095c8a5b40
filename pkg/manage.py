#!/usr/bin/env python
"""SingLab command-line entry point.

Corpus generation, feature extraction, training, synthesis and evaluation
are Django management commands, e.g. ``python manage.py train_acoustic``.
"""
import os
import sys


def main():
    """Run a toolkit or administrative command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'singlab_project.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the packages from "
            "requirements.txt into the active environment."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
