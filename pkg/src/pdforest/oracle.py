"""Brute-force reference implementations used only by tests and --verify.

These follow the defining formulas directly: override the coalition's
columns in every background row, predict, average; interaction values by
inclusion-exclusion over coalition subsets.  They share the ensemble's
own ``predict`` so both sides of every comparison agree on the split tie
convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InputError
from .model import TreeEnsemble


@dataclass(frozen=True)
class Coalition:
    """A duplicate-free feature set with one pinned value per feature."""

    features: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.features) != len(set(self.features)):
            raise InputError("coalition features must be duplicate-free")
        if len(self.features) != len(self.values):
            raise InputError("coalition features and values must align")

    @classmethod
    def from_mapping(cls, mapping) -> "Coalition":
        items = list(mapping.items())
        return cls(
            features=tuple(f for f, _ in items),
            values=tuple(float(v) for _, v in items),
        )

    def restrict(self, features) -> "Coalition":
        keep = set(features)
        pairs = [(f, v) for f, v in zip(self.features, self.values) if f in keep]
        return Coalition(
            features=tuple(f for f, _ in pairs), values=tuple(v for _, v in pairs)
        )


def _as_coalition(coalition) -> Coalition:
    if isinstance(coalition, Coalition):
        return coalition
    return Coalition.from_mapping(coalition)


def oracle_pdv(ensemble: TreeEnsemble, B: np.ndarray, coalition) -> float:
    """Average prediction with the coalition's features pinned and all
    other features marginalized over the background rows."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or len(B) < 1:
        raise InputError("oracle requires a non-empty background matrix")
    c = _as_coalition(coalition)
    X = B.copy()
    for f, v in zip(c.features, c.values):
        X[:, f] = v
    return float(np.mean(ensemble.predict_batch(X)))


def oracle_pdiv(ensemble: TreeEnsemble, B: np.ndarray, coalition) -> float:
    """Inclusion-exclusion of pinned-subset averages over all subsets of
    the coalition."""
    c = _as_coalition(coalition)
    h = len(c.features)
    if h > 20:
        raise InputError("coalition too large for the 2^|F| subset loop")
    total = 0.0
    for r in range(h + 1):
        sign = 1.0 if (h - r) % 2 == 0 else -1.0
        for sub in combinations(range(h), r):
            part = Coalition(
                features=tuple(c.features[i] for i in sub),
                values=tuple(c.values[i] for i in sub),
            )
            total += sign * oracle_pdv(ensemble, B, part)
    return total


def mean_prediction_oracle(ensemble: TreeEnsemble, B: np.ndarray) -> float:
    return oracle_pdv(ensemble, B, Coalition((), ()))
