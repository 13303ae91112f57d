"""Secure synchronous-flooding engine, simulator and experiment tooling."""

__version__ = "0.1.0"
