"""Facilitation/habitat-loss resource-consumer model: smooth and PWL analysis, stochastic ensembles."""

__version__ = "1.0.0"
