"""Evaluator, runtime values, event log and hole execution."""
