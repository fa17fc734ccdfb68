"""Explicit ReLU generative networks with certified Wasserstein error."""

__version__ = "0.1.0"
