"""Lifecycle tasks, trials, checkpoints and reports."""
