"""Decentralized multi-robot social navigation with LLM actors and critics."""

__version__ = "0.1.0"
