"""Emotion-aware audio-visual dialogue: encoders, staged training, evaluation, serving."""

__version__ = "0.1.0"
