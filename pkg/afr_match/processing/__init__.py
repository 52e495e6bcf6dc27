"""Matching, evaluation and statistics."""
