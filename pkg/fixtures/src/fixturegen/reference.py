"""Brute-force reference values computed with the trained model's own
predictor: pin columns, predict everything, average."""

from __future__ import annotations

from itertools import combinations

import numpy as np


def quantile_grid(col: np.ndarray, k: int) -> np.ndarray:
    """Evenly spaced inclusive-linear quantiles (median when k == 1)."""
    qs = np.array([0.5]) if k == 1 else np.linspace(0.0, 1.0, k)
    return np.quantile(col, qs)


def brute_pdv(predict, B: np.ndarray, fixed: dict) -> float:
    X = np.array(B, dtype=np.float64, copy=True)
    for feat, value in fixed.items():
        X[:, feat] = value
    return float(np.mean(predict(X)))


def brute_pdp(predict, B: np.ndarray, k: int = 5) -> list:
    """(feature, value, pdv) triples for every feature at k quantile values."""
    rows = []
    for feat in range(B.shape[1]):
        for value in quantile_grid(B[:, feat], k):
            rows.append((feat, float(value), brute_pdv(predict, B, {feat: value})))
    return rows


def brute_joint(predict, B: np.ndarray, pairs: list, k: int = 5) -> list:
    """(f_a, f_b, a_value, b_value, pdv) rows for the given feature pairs."""
    rows = []
    for fa, fb in pairs:
        grid_a = quantile_grid(B[:, fa], k)
        grid_b = quantile_grid(B[:, fb], k)
        for a in grid_a:
            for b in grid_b:
                rows.append(
                    (fa, fb, float(a), float(b),
                     brute_pdv(predict, B, {fa: a, fb: b}))
                )
    return rows


def brute_pdivs_up_to_size(
    predict, B: np.ndarray, row: np.ndarray, max_size: int = 3
) -> dict:
    """Interaction values of one consumer row for every feature subset up
    to ``max_size``, by inclusion-exclusion over memoized pinned averages."""
    n_features = B.shape[1]
    pdv_memo: dict = {}

    def pdv_of(subset: tuple) -> float:
        if subset not in pdv_memo:
            pdv_memo[subset] = brute_pdv(
                predict, B, {f: row[f] for f in subset}
            )
        return pdv_memo[subset]

    out: dict = {}
    for size in range(max_size + 1):
        for S in combinations(range(n_features), size):
            total = 0.0
            for r in range(size + 1):
                sign = 1.0 if (size - r) % 2 == 0 else -1.0
                for sub in combinations(S, r):
                    total += sign * pdv_of(sub)
            out[S] = total
    return out
