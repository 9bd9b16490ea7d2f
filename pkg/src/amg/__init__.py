"""Adversarial malware generation lab: PE rewriting, surrogate detectors, RL agents."""

__version__ = "0.1.0"
