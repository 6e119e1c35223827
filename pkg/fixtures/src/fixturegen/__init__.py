"""Fixture bundle generator for cross-ecosystem validation of pdforest.

Trains small scikit-learn gradient-boosted models on synthetic data,
exports them in the documented tree-dump-json schema, and records golden
outputs (predictions, brute partial-dependence values, joint grids, and
interaction values) computed with scikit-learn's own predictor as the
external reference.  Bundles are committed; consumers never need this
toolchain installed.
"""

__version__ = "0.1.0"
