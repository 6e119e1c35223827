import json
from pathlib import Path

import numpy as np
import pytest

from pdforest import Dataset, parse_model

REPO_ROOT = Path(__file__).resolve().parents[1]
GOLDEN_DIR = REPO_ROOT / "docs" / "golden"
BUNDLE_DIR = REPO_ROOT / "fixtures" / "bundles"


@pytest.fixture
def toy_model():
    """Single stump: f0 @ 0.5 -> leaves 0.0 / 1.0."""
    return parse_model((GOLDEN_DIR / "model_stump.json").read_bytes())


@pytest.fixture
def toy_background():
    return Dataset(("f0",), np.array([[0.0], [1.0]]), role="background")


@pytest.fixture
def constant_model():
    return parse_model(json.dumps([{"leaf": 7.0}]))


def make_model(trees, base_score=0.0, feature_names=None):
    doc = {"base_score": base_score, "trees": trees}
    if feature_names is not None:
        doc["feature_names"] = feature_names
    return parse_model(json.dumps(doc))
