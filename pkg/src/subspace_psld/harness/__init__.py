"""Experiment orchestration: configuration, grid runs, verification checks and reports."""
