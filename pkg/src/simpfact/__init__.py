"""Factuality evaluation toolkit for text simplification."""

__version__ = "0.1.0"

from . import classifier, corpus, metrics, perturb, providers, service, stats  # noqa: F401
