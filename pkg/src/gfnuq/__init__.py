"""Epistemic uncertainty of GFlowNet policies via polynomial chaos surrogates."""

__version__ = "0.1.0"
