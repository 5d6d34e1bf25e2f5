"""Streaming approximation of Max-CSPs via the basic LP, with hard-instance tooling."""

__version__ = "0.1.0"
