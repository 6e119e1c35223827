"""Seeded builders for synthetic ensembles and datasets.

Used by the test suite and the benchmark scripts; handy for
experimenting without training a real model.  All builders go through
``parse_model`` so synthetic models exercise the same dump schema as
externally trained ones.
"""

from __future__ import annotations

import json

import numpy as np

from .data import Dataset
from .model import TreeEnsemble, parse_model


def _random_node(rng, depth, n_features, leaf_prob, cover):
    if depth == 0 or (rng.random() < leaf_prob and cover < 1e9):
        return {"leaf": float(rng.normal()), "cover": cover}
    ratio = float(rng.uniform(0.2, 0.8))
    return {
        "split_feature": int(rng.integers(n_features)),
        "threshold": float(rng.normal()),
        "yes": _random_node(rng, depth - 1, n_features, leaf_prob, cover * ratio),
        "no": _random_node(rng, depth - 1, n_features, leaf_prob, cover * (1.0 - ratio)),
        "cover": cover,
    }


def random_ensemble(
    seed: int,
    n_trees: int = 5,
    depth: int = 4,
    n_features: int = 4,
    leaf_prob: float = 0.2,
    base_score: float = 0.0,
) -> TreeEnsemble:
    """Random ensemble with positive covers on every node.

    Features may repeat along a path; thresholds and leaf values are
    standard normal, matching the synthetic datasets below.
    """
    rng = np.random.default_rng(seed)
    trees = [
        _random_node(rng, depth, n_features, leaf_prob, 1000.0)
        for _ in range(n_trees)
    ]
    doc = {"base_score": base_score,
           "feature_names": [f"f{i}" for i in range(n_features)],
           "trees": trees}
    return parse_model(json.dumps(doc))


def _full_node(rng, depth, n_features, used, cover):
    if depth == 0:
        return {"leaf": float(rng.normal()), "cover": cover}
    free = [f for f in range(n_features) if f not in used]
    feat = int(rng.choice(free)) if free else int(rng.integers(n_features))
    ratio = float(rng.uniform(0.3, 0.7))
    return {
        "split_feature": feat,
        "threshold": float(rng.normal()),
        "yes": _full_node(rng, depth - 1, n_features, used | {feat}, cover * ratio),
        "no": _full_node(rng, depth - 1, n_features, used | {feat}, cover * (1 - ratio)),
        "cover": cover,
    }


def full_ensemble(
    seed: int, n_trees: int, depth: int, n_features: int
) -> TreeEnsemble:
    """Full binary trees of exact depth with distinct features per path,
    the worst case for per-path compilation cost."""
    rng = np.random.default_rng(seed)
    trees = [
        _full_node(rng, depth, n_features, frozenset(), 1000.0)
        for _ in range(n_trees)
    ]
    doc = {"base_score": 0.0,
           "feature_names": [f"f{i}" for i in range(n_features)],
           "trees": trees}
    return parse_model(json.dumps(doc))


def random_dataset(seed: int, n_rows: int, n_features: int, role: str = "") -> Dataset:
    rng = np.random.default_rng(seed)
    return Dataset(
        columns=tuple(f"f{i}" for i in range(n_features)),
        rows=rng.normal(size=(n_rows, n_features)),
        role=role,
    )


def stump_model(feature: int = 0, threshold: float = 0.5,
                left: float = 0.0, right: float = 1.0,
                cover_left: float | None = None,
                cover_right: float | None = None,
                n_features: int | None = None) -> TreeEnsemble:
    """Single-split tree; covers optional for the path-dependent mode."""
    yes: dict = {"leaf": left}
    no: dict = {"leaf": right}
    tree: dict = {"split_feature": feature, "threshold": threshold, "yes": yes, "no": no}
    if cover_left is not None and cover_right is not None:
        yes["cover"] = cover_left
        no["cover"] = cover_right
        tree["cover"] = cover_left + cover_right
    names = [f"f{i}" for i in range(n_features or feature + 1)]
    return parse_model(json.dumps({"feature_names": names, "trees": [tree]}))
