"""Numerical harness for stochastic curve-shortening flow in a tubular chart."""

from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
