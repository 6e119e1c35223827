"""Export scikit-learn gradient-boosting regressors into the pdforest
tree-dump-json schema.

scikit-learn routes ``value <= threshold`` to the left child while the
dump schema's ``yes`` branch means ``value < threshold`` (ties go to
``no``).  The two agree on every input that never equals a threshold
exactly; :func:`assert_no_threshold_ties` enforces that property for all
recorded datasets so the exported model is equivalent on them.
"""

from __future__ import annotations

import numpy as np


def _node_dict(tree, node: int, scale: float) -> dict:
    cover = float(tree.weighted_n_node_samples[node])
    if tree.children_left[node] == -1:
        return {"leaf": float(tree.value[node][0][0] * scale), "cover": cover}
    return {
        "split_feature": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "cover": cover,
        "yes": _node_dict(tree, int(tree.children_left[node]), scale),
        "no": _node_dict(tree, int(tree.children_right[node]), scale),
    }


def export_model(est, feature_names: list[str]) -> dict:
    """Dump a fitted GradientBoostingRegressor as a wrapper-form document.

    Leaf values absorb the learning rate; the base score is the init
    estimator's constant prediction.
    """
    base = float(est._raw_predict_init(np.zeros((1, est.n_features_in_)))[0][0])
    trees = [
        _node_dict(stage[0].tree_, 0, est.learning_rate)
        for stage in est.estimators_
    ]
    return {
        "base_score": base,
        "feature_names": list(feature_names),
        "trees": trees,
    }


def collect_thresholds(doc: dict) -> dict:
    """Per-feature set of all split thresholds in a dump document."""
    out: dict = {}

    def walk(node):
        if "leaf" in node:
            return
        out.setdefault(node["split_feature"], set()).add(node["threshold"])
        walk(node["yes"])
        walk(node["no"])

    for tree in doc["trees"]:
        walk(tree)
    return out


def assert_no_threshold_ties(doc: dict, named_matrices: dict) -> None:
    """Fail if any recorded value coincides exactly with a split threshold
    of its column; under that condition the '<' and '<=' conventions are
    indistinguishable on the recorded data."""
    thresholds = collect_thresholds(doc)
    for name, X in named_matrices.items():
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        for feat, ths in thresholds.items():
            if feat >= X.shape[1]:
                continue
            ties = set(X[:, feat].tolist()) & ths
            if ties:
                raise AssertionError(
                    f"{name}: column {feat} contains exact threshold values "
                    f"{sorted(ties)[:3]}; regenerate with another seed"
                )
