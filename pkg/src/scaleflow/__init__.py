"""Galerkin discretization of unregularized gradient flows on scale Hilbert spaces.

Modules, bottom-up: ``scale_space`` (weighted sequence scales), ``loop_space`` (Fourier
loops and Lagrangian paths), ``frames`` (almost complex structures, moving frames,
Floer and delay fields, axiom suite), ``flow`` (integration and certificates),
``compactness`` (norm ledgers, tails, subsequence extraction) and ``harness`` (CLI).
"""

__version__ = "0.1.0"
