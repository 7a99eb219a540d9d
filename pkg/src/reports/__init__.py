"""Batch frontend: model configs, commands and JSON reports."""
