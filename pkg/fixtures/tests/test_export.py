import numpy as np
import pytest
from sklearn.datasets import make_friedman1
from sklearn.ensemble import GradientBoostingRegressor

from fixturegen.export import assert_no_threshold_ties, collect_thresholds, export_model


def predict_dump(doc: dict, X: np.ndarray) -> np.ndarray:
    """Minimal independent interpreter of the dump schema: strictly-less
    goes to 'yes', ties to 'no'."""

    def one(node, row):
        while "leaf" not in node:
            node = node["yes"] if row[node["split_feature"]] < node["threshold"] else node["no"]
        return node["leaf"]

    return np.array(
        [doc["base_score"] + sum(one(t, row) for t in doc["trees"]) for row in X]
    )


@pytest.fixture(scope="module")
def fitted():
    X, y = make_friedman1(n_samples=400, n_features=6, noise=1.0, random_state=3)
    est = GradientBoostingRegressor(
        n_estimators=20, max_depth=4, learning_rate=0.2, random_state=3
    ).fit(X, y)
    return est, X


def test_export_reproduces_sklearn_predictions(fitted):
    est, X = fitted
    doc = export_model(est, [f"f{i}" for i in range(X.shape[1])])
    got = predict_dump(doc, X)
    want = est.predict(X)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_export_records_covers(fitted):
    est, X = fitted
    doc = export_model(est, [f"f{i}" for i in range(X.shape[1])])
    root = doc["trees"][0]
    assert root["cover"] == pytest.approx(len(X))
    assert root["yes"]["cover"] + root["no"]["cover"] == pytest.approx(root["cover"])


def test_threshold_collection_and_tie_guard(fitted):
    est, X = fitted
    doc = export_model(est, [f"f{i}" for i in range(X.shape[1])])
    thresholds = collect_thresholds(doc)
    assert thresholds and all(len(v) > 0 for v in thresholds.values())
    assert_no_threshold_ties(doc, {"train": X})
    feat = next(iter(thresholds))
    poisoned = X.copy()
    poisoned[0, feat] = next(iter(thresholds[feat]))
    with pytest.raises(AssertionError, match="threshold values"):
        assert_no_threshold_ties(doc, {"train": poisoned})
