"""Saliency-guided moment retrieval and highlight detection toolkit."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402,F401
