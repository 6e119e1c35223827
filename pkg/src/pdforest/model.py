"""Tree-ensemble ingestion: dump parsing, prediction, and leaf-path extraction.

The dump format is a documented JSON schema (see ``docs/formats.md``): an
array of trees, each a recursive node object with keys ``split_feature``,
``threshold``, ``yes``, ``no``, ``leaf``, ``cover``.  An optional wrapper
object ``{"base_score": ..., "feature_names": [...], "trees": [...]}``
carries ensemble-level metadata.

Split convention: a node routes rows with ``value < threshold`` to its
``yes`` child and everything else (ties included) to its ``no`` child.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParseError, SchemaError

NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass(frozen=True)
class SplitCondition:
    """Half-open interval constraint ``lo <= x[feature] < hi``.

    A raw split produces single-sided intervals: the ``yes`` branch of a
    node splitting at ``t`` imposes ``[-inf, t)``, the ``no`` branch
    ``[t, +inf)``.  Merged conditions along a path may be bounded on both
    sides.
    """

    feature: int
    lo: float
    hi: float

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def complement_interval(self) -> tuple[float, float]:
        """The interval satisfied exactly when this condition fails.

        Only defined for single-sided (raw split) conditions, where the
        two intervals partition the real line.
        """
        if self.lo == NEG_INF and self.hi < POS_INF:
            return (self.hi, POS_INF)
        if self.hi == POS_INF and self.lo > NEG_INF:
            return (NEG_INF, self.lo)
        raise ValueError("complement of a doubly-bounded interval is not an interval")

    def contains(self, x: float) -> bool:
        return self.lo <= x < self.hi

    def contains_array(self, col: np.ndarray) -> np.ndarray:
        """Vectorized membership test for one data column."""
        if self.lo == NEG_INF:
            return col < self.hi
        if self.hi == POS_INF:
            return col >= self.lo
        return (col >= self.lo) & (col < self.hi)

    def intersect(self, other: "SplitCondition") -> "SplitCondition | None":
        """Intersection with another condition on the same feature.

        Returns None when the intersection is empty (unreachable path).
        """
        if other.feature != self.feature:
            raise ValueError("cannot intersect conditions on different features")
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo >= hi:
            return None
        return SplitCondition(self.feature, lo, hi)


@dataclass(frozen=True)
class LeafPath:
    """One reachable root-to-leaf path with per-feature merged conditions."""

    leaf_value: float
    conditions: tuple[SplitCondition, ...]
    depth: int
    node_ids: tuple[int, ...]

    @property
    def features(self) -> tuple[int, ...]:
        return tuple(c.feature for c in self.conditions)


@dataclass
class Tree:
    """One binary tree stored as parallel node arrays (node 0 is the root).

    Leaves have ``feature == -1`` and self-referencing child links so the
    vectorized traversal is a fixed-point iteration.
    """

    feature: np.ndarray
    threshold: np.ndarray
    yes: np.ndarray
    no: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    max_depth: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def predict_row(self, row: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            if row[self.feature[node]] < self.threshold[node]:
                node = self.yes[node]
            else:
                node = self.no[node]
        return float(self.value[node])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        for _ in range(self.max_depth):
            feat = self.feature[idx]
            at_leaf = feat < 0
            safe_feat = np.where(at_leaf, 0, feat)
            goes_yes = X[rows, safe_feat] < self.threshold[idx]
            nxt = np.where(goes_yes, self.yes[idx], self.no[idx])
            idx = np.where(at_leaf, idx, nxt)
        return self.value[idx]

    def to_node_dict(self, node: int = 0) -> dict:
        """Serialize back into the recursive dump schema."""
        out: dict = {}
        if not math.isnan(self.cover[node]):
            out["cover"] = float(self.cover[node])
        if self.feature[node] < 0:
            out["leaf"] = float(self.value[node])
            return out
        out["split_feature"] = int(self.feature[node])
        out["threshold"] = float(self.threshold[node])
        out["yes"] = self.to_node_dict(self.yes[node])
        out["no"] = self.to_node_dict(self.no[node])
        return out


@dataclass
class TreeEnsemble:
    """An additive ensemble: prediction = base_score + one leaf per tree."""

    trees: list[Tree]
    base_score: float
    feature_names: list[str]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def used_features(self) -> list[int]:
        used: set[int] = set()
        for t in self.trees:
            used.update(int(f) for f in t.feature[t.feature >= 0])
        return sorted(used)

    def _check_row(self, row: np.ndarray) -> np.ndarray:
        row = np.asarray(row, dtype=np.float64)
        if row.ndim != 1 or len(row) < self.n_features:
            raise InputError(
                f"row supplies {row.shape} values, model references {self.n_features} features"
            )
        if np.isnan(row[: self.n_features]).any():
            raise InputError("row has missing values; missing-value routing is unsupported")
        return row

    def predict(self, row: np.ndarray) -> float:
        row = self._check_row(row)
        return self.base_score + sum(t.predict_row(row) for t in self.trees)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < self.n_features:
            raise InputError(
                f"input of shape {X.shape} does not cover {self.n_features} model features"
            )
        if np.isnan(X[:, : self.n_features]).any():
            raise InputError("input has missing values; missing-value routing is unsupported")
        out = np.full(len(X), self.base_score, dtype=np.float64)
        for t in self.trees:
            out += t.predict_batch(X)
        return out

    def thresholds_for(self, feature: int) -> np.ndarray:
        """Sorted distinct thresholds of every node splitting on ``feature``."""
        vals: list[float] = []
        for t in self.trees:
            mask = t.feature == feature
            vals.extend(t.threshold[mask].tolist())
        return np.unique(np.asarray(vals, dtype=np.float64))

    def to_dump(self) -> dict:
        return {
            "base_score": self.base_score,
            "feature_names": list(self.feature_names),
            "trees": [t.to_node_dict() for t in self.trees],
        }

    def model_hash(self) -> str:
        import hashlib

        blob = json.dumps(self.to_dump(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class _TreeBuilder:
    """Flattens one recursive node object into parallel arrays."""

    def __init__(self, n_features_hint: int | None):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.yes: list[int] = []
        self.no: list[int] = []
        self.value: list[float] = []
        self.cover: list[float] = []
        self.max_depth = 0
        self.max_feature = -1
        self.n_features_hint = n_features_hint

    def add(self, node: object, path: str, depth: int) -> int:
        if not isinstance(node, dict):
            raise ParseError(f"{path}: expected a node object, got {type(node).__name__}")
        self.max_depth = max(self.max_depth, depth)
        idx = len(self.feature)
        self.feature.append(0)
        self.threshold.append(math.nan)
        self.yes.append(idx)
        self.no.append(idx)
        self.value.append(math.nan)
        self.cover.append(math.nan)

        cover = node.get("cover")
        if cover is not None:
            if not isinstance(cover, (int, float)) or math.isnan(cover) or cover < 0:
                raise SchemaError(f"{path}.cover: must be a non-negative number, got {cover!r}")
            self.cover[idx] = float(cover)

        is_leaf = "leaf" in node
        is_split = "split_feature" in node
        if is_leaf and is_split:
            raise SchemaError(f"{path}: node has both 'leaf' and 'split_feature'")
        if is_leaf:
            leaf = node["leaf"]
            if not isinstance(leaf, (int, float)) or not math.isfinite(leaf):
                raise SchemaError(f"{path}.leaf: must be a finite number, got {leaf!r}")
            unknown = set(node) - {"leaf", "cover"}
            if unknown:
                raise SchemaError(f"{path}: unknown keys {sorted(unknown)} on a leaf node")
            self.feature[idx] = -1
            self.value[idx] = float(leaf)
            return idx
        if not is_split:
            raise ParseError(f"{path}: node is neither a split ('split_feature') nor a leaf ('leaf')")

        unknown = set(node) - {"split_feature", "threshold", "yes", "no", "cover"}
        if unknown:
            raise SchemaError(
                f"{path}: unknown keys {sorted(unknown)}; only numeric '<' splits are supported"
            )
        feat = node["split_feature"]
        if not isinstance(feat, int) or isinstance(feat, bool) or feat < 0:
            raise SchemaError(f"{path}.split_feature: must be a non-negative integer, got {feat!r}")
        if self.n_features_hint is not None and feat >= self.n_features_hint:
            raise SchemaError(
                f"{path}.split_feature: feature {feat} out of range for "
                f"{self.n_features_hint} declared feature names"
            )
        thr = node.get("threshold")
        if not isinstance(thr, (int, float)) or not math.isfinite(thr):
            raise SchemaError(f"{path}.threshold: must be a finite number, got {thr!r}")
        if "yes" not in node or "no" not in node:
            raise ParseError(f"{path}: split node must have both 'yes' and 'no' children")

        self.feature[idx] = feat
        self.threshold[idx] = float(thr)
        self.max_feature = max(self.max_feature, feat)
        self.yes[idx] = self.add(node["yes"], f"{path}.yes", depth + 1)
        self.no[idx] = self.add(node["no"], f"{path}.no", depth + 1)
        return idx

    def build(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            yes=np.asarray(self.yes, dtype=np.int64),
            no=np.asarray(self.no, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
            cover=np.asarray(self.cover, dtype=np.float64),
            max_depth=self.max_depth,
        )


def parse_model(model_dump, format: str = "tree-dump-json") -> TreeEnsemble:
    """Parse a model dump into a :class:`TreeEnsemble`.

    ``model_dump`` may be bytes, str, or a readable stream.  The only
    supported format is ``tree-dump-json``.
    """
    if format != "tree-dump-json":
        raise SchemaError(f"unknown model dump format {format!r}")
    if isinstance(model_dump, (bytes, bytearray)):
        text = model_dump.decode("utf-8")
    elif isinstance(model_dump, str):
        text = model_dump
    elif isinstance(model_dump, io.IOBase) or hasattr(model_dump, "read"):
        text = model_dump.read()
        if isinstance(text, (bytes, bytearray)):
            text = text.decode("utf-8")
    else:
        raise ParseError(f"unsupported dump source {type(model_dump).__name__}")

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from None

    base_score = 0.0
    feature_names: list[str] | None = None
    if isinstance(doc, dict):
        unknown = set(doc) - {"base_score", "feature_names", "trees"}
        if unknown:
            raise SchemaError(f"$: unknown top-level keys {sorted(unknown)}")
        if "trees" not in doc:
            raise ParseError("$: wrapper object must contain a 'trees' array")
        base = doc.get("base_score", 0.0)
        if not isinstance(base, (int, float)) or not math.isfinite(base):
            raise SchemaError(f"$.base_score: must be a finite number, got {base!r}")
        base_score = float(base)
        names = doc.get("feature_names")
        if names is not None:
            if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
                raise SchemaError("$.feature_names: must be a list of strings")
            feature_names = list(names)
        doc = doc["trees"]
    if not isinstance(doc, list):
        raise ParseError("$: expected an array of trees")

    trees = []
    max_feature = -1
    hint = len(feature_names) if feature_names is not None else None
    for i, node in enumerate(doc):
        builder = _TreeBuilder(hint)
        builder.add(node, f"trees[{i}]", depth=0)
        trees.append(builder.build())
        max_feature = max(max_feature, builder.max_feature)
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(max_feature + 1)]
    return TreeEnsemble(trees=trees, base_score=base_score, feature_names=feature_names)


def load_model(path) -> TreeEnsemble:
    with open(path, "rb") as fh:
        return parse_model(fh.read())


def _merge_condition(
    merged: dict[int, SplitCondition], feature: int, lo: float, hi: float
) -> dict[int, SplitCondition] | None:
    """Intersect a new single-split interval into a per-feature condition map.

    Returns the updated copy, or None when the path becomes unreachable.
    """
    new = SplitCondition(feature, lo, hi)
    out = dict(merged)
    if feature in merged:
        inter = merged[feature].intersect(new)
        if inter is None:
            return None
        out[feature] = inter
    else:
        out[feature] = new
    return out


def extract_paths(ensemble: TreeEnsemble) -> list[tuple[int, LeafPath]]:
    """One :class:`LeafPath` per reachable leaf, with merged conditions.

    Conditions are intersected per distinct feature, in order of first
    appearance along the path; unreachable leaves are dropped.
    """
    out: list[tuple[int, LeafPath]] = []
    for t_idx, tree in enumerate(ensemble.trees):
        stack: list[tuple[int, dict[int, SplitCondition], tuple[int, ...]]] = [(0, {}, (0,))]
        while stack:
            node, merged, ids = stack.pop()
            if tree.is_leaf(node):
                conds = tuple(merged.values())
                out.append(
                    (
                        t_idx,
                        LeafPath(
                            leaf_value=float(tree.value[node]),
                            conditions=conds,
                            depth=len(ids) - 1,
                            node_ids=ids,
                        ),
                    )
                )
                continue
            f = int(tree.feature[node])
            thr = float(tree.threshold[node])
            no_side = _merge_condition(merged, f, thr, POS_INF)
            if no_side is not None:
                stack.append((int(tree.no[node]), no_side, ids + (int(tree.no[node]),)))
            yes_side = _merge_condition(merged, f, NEG_INF, thr)
            if yes_side is not None:
                stack.append((int(tree.yes[node]), yes_side, ids + (int(tree.yes[node]),)))
    return out


def predict(ensemble: TreeEnsemble, row) -> float:
    """Module-level alias for :meth:`TreeEnsemble.predict`."""
    return ensemble.predict(row)
