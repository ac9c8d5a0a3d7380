"""Bayesian optimization over unordered point sets.

Permutation-invariant GP surrogates built on Sinkhorn divergences, set-kernel
baselines, a batch-EI BO loop with grid feasibility handling, a synthetic
benchmark suite, and numerical diagnostics.
"""

from ._backend import BACKEND_NAME

__version__ = "0.1.0"

__all__ = ["BACKEND_NAME", "__version__"]
