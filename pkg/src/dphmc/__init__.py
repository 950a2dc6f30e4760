"""Differentially private MCMC samplers, accounting, models, and benchmarks."""

from dphmc import harness, metrics, models, privacy, samplers

__all__ = ["privacy", "models", "samplers", "metrics", "harness"]
__version__ = "0.1.0"
