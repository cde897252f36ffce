"""Adversarial robustness benchmark for modulation recognition on synthetic IQ signals."""

__version__ = "0.1.0"
