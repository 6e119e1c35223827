"""Per-leaf compilation and linear-metric evaluation over condition bitmasks.

Each reachable leaf with d merged path conditions compiles into a
coverage table over the 2^d condition subsets: ``coverage[m]`` is the
fraction of background rows satisfying every condition in ``m`` (possibly
more), obtained by histogramming per-row masks and applying a
superset-sum transform.  The path-dependent variant replaces empirical
coverage with a separable product of per-branch cover ratios.

The leaf's formula decomposes into one cube per subset ``P`` of its
conditions: positive literals ``P``, negative literals the complement
``N``, consumer-independent weight ``leaf_value * coverage[N]``, and the
consumer-dependent gate "the consumer satisfies every condition in P"
applied at aggregation time.  Any linear metric is evaluated once per
leaf into a table indexed by consumer mask and reused for every row.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    DegenerateModelError,
    InputError,
    NumericError,
)
from .model import (
    NEG_INF,
    POS_INF,
    LeafPath,
    SplitCondition,
    Tree,
    TreeEnsemble,
    extract_paths,
)

DEFAULT_MASK_CAPACITY = 30


@dataclass(frozen=True)
class Cube:
    """A weighted conjunction of positive and negative feature literals."""

    s_plus: frozenset
    s_minus: frozenset
    weight: float

    def to_debug_dict(self) -> dict:
        return {
            "pos": sorted(self.s_plus),
            "neg": sorted(self.s_minus),
            "w": self.weight,
        }


@dataclass
class LeafCompilation:
    """A leaf plus everything the metric evaluation needs.

    ``coverage`` is monotone non-increasing under mask superset and
    ``coverage[0] == 1``.  ``pd_weights`` holds per-condition branch-cover
    ratios in path-dependent mode (None in background mode).
    ``metric_table`` is filled by :func:`evaluate_metric`.
    """

    leaf: LeafPath
    tree_index: int
    d: int
    coverage: np.ndarray
    pd_weights: np.ndarray | None = None
    metric_table: list | None = None

    @property
    def features(self) -> tuple[int, ...]:
        return self.leaf.features

    def consumer_masks(self, X: np.ndarray) -> np.ndarray:
        return leaf_masks(self.leaf, X)


def superset_sum(values: np.ndarray) -> np.ndarray:
    """Zeta transform over supersets: out[m] = sum of values[s] for s >= m."""
    out = np.array(values, dtype=np.float64, copy=True)
    n = len(out)
    step = 1
    while step < n:
        view = out.reshape(-1, 2 * step)
        view[:, :step] += view[:, step:]
        step *= 2
    return out


def leaf_masks(leaf: LeafPath, X: np.ndarray) -> np.ndarray:
    """Bitmask of the leaf's conditions each row of ``X`` satisfies.

    Bit i corresponds to conditions[i] (first-appearance path order).
    """
    masks = np.zeros(len(X), dtype=np.int64)
    for i, cond in enumerate(leaf.conditions):
        masks |= cond.contains_array(X[:, cond.feature]).astype(np.int64) << i
    return masks


def _check_capacity(leaf: LeafPath, tree_index: int, mask_capacity: int) -> None:
    if len(leaf.conditions) > mask_capacity:
        raise CapacityError(
            f"tree {tree_index}, leaf at node {leaf.node_ids[-1]}: "
            f"{len(leaf.conditions)} merged conditions exceed the mask capacity "
            f"of {mask_capacity}",
            tree_index=tree_index,
            node_id=leaf.node_ids[-1],
        )


def walk_tree_masks(
    tree: Tree,
    matrices: list,
    tree_index: int = 0,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
):
    """Yield every reachable leaf of one tree with per-row condition masks
    for each given row matrix.

    Masks are pushed down the tree incrementally, so each node's split is
    evaluated once per matrix instead of once per leaf below it; a
    repeated feature narrows its existing bit in place.  Produces exactly
    the paths of ``extract_paths`` and the masks of :func:`leaf_masks`.
    """
    zeros = [np.zeros(len(X), dtype=np.int32) for X in matrices]
    stack = [(0, (), {}, zeros, (0,))]
    while stack:
        node, conds, slot_of, masks, ids = stack.pop()
        f = int(tree.feature[node])
        if f < 0:
            leaf = LeafPath(
                leaf_value=float(tree.value[node]),
                conditions=conds,
                depth=len(ids) - 1,
                node_ids=ids,
            )
            yield leaf, masks
            continue
        thr = float(tree.threshold[node])
        sats = [X[:, f] < thr for X in matrices]
        for child, lo, hi, flip in (
            (int(tree.no[node]), thr, POS_INF, True),
            (int(tree.yes[node]), NEG_INF, thr, False),
        ):
            side = [~s if flip else s for s in sats]
            if f in slot_of:
                slot = slot_of[f]
                merged = conds[slot].intersect(SplitCondition(f, lo, hi))
                if merged is None:
                    continue
                new_conds = conds[:slot] + (merged,) + conds[slot + 1 :]
                new_masks = [
                    (m & ~(1 << slot)) | ((m >> slot & 1) & s) << slot
                    for m, s in zip(masks, side)
                ]
                new_slots = slot_of
            else:
                slot = len(conds)
                if slot >= mask_capacity:
                    raise CapacityError(
                        f"tree {tree_index}, node {node}: path exceeds the mask "
                        f"capacity of {mask_capacity} merged conditions",
                        tree_index=tree_index,
                        node_id=node,
                    )
                new_conds = conds + (SplitCondition(f, lo, hi),)
                new_masks = [
                    m | (s.astype(np.int32) << slot) for m, s in zip(masks, side)
                ]
                new_slots = {**slot_of, f: slot}
            stack.append((child, new_conds, new_slots, new_masks, ids + (child,)))


def compile_leaf_background(
    leaf: LeafPath,
    B: np.ndarray,
    tree_index: int = 0,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
) -> LeafCompilation:
    """Histogram background masks and superset-sum them into coverage."""
    _check_capacity(leaf, tree_index, mask_capacity)
    m = len(B)
    if m < 1:
        raise InputError("background mode requires at least one background row")
    d = len(leaf.conditions)
    hist = np.bincount(leaf_masks(leaf, B), minlength=1 << d).astype(np.float64)
    coverage = superset_sum(hist) / m
    return LeafCompilation(leaf=leaf, tree_index=tree_index, d=d, coverage=coverage)


def compile_leaf_pathdep(
    leaf: LeafPath,
    tree: Tree,
    tree_index: int = 0,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
) -> LeafCompilation:
    """Coverage as a separable product of per-branch training-cover ratios.

    A feature split on at several path nodes gets the product of those
    nodes' ratios as its merged condition's weight.
    """
    _check_capacity(leaf, tree_index, mask_capacity)
    d = len(leaf.conditions)
    slot_of = {c.feature: i for i, c in enumerate(leaf.conditions)}
    pd_w = np.ones(d, dtype=np.float64)
    for parent, child in zip(leaf.node_ids, leaf.node_ids[1:]):
        parent_cover = tree.cover[parent]
        child_cover = tree.cover[child]
        if math.isnan(parent_cover) or math.isnan(child_cover):
            raise DegenerateModelError(
                f"tree {tree_index}: node covers missing; path-dependent mode "
                "requires covers on every node"
            )
        if parent_cover <= 0:
            raise DegenerateModelError(
                f"tree {tree_index}, node {parent}: zero cover on a split node"
            )
        pd_w[slot_of[int(tree.feature[parent])]] *= child_cover / parent_cover
    coverage = np.ones(1 << d, dtype=np.float64)
    for i in range(d):
        step = 1 << i
        view = coverage.reshape(-1, 2 * step)
        view[:, step:] *= pd_w[i]
    return LeafCompilation(
        leaf=leaf, tree_index=tree_index, d=d, coverage=coverage, pd_weights=pd_w
    )


def _subsets_of(mask: int):
    """All submasks of ``mask``, ascending."""
    sub = 0
    while True:
        yield sub
        if sub == mask:
            return
        sub = (sub - mask) & mask


def enumerate_cubes(comp: LeafCompilation, max_positive_arity: int | None = None):
    """Walk the leaf's full cube space, one cube per (positive, negative,
    absent) partition of its conditions with ``|positive|`` at most the
    arity cap.

    Only the partitions with an empty absent set carry the leaf's mass
    (weight ``leaf_value * coverage[negatives]``); partitions that leave a
    condition out are emitted with weight zero, so the stream both
    enumerates the 3^d cube space exactly and sums to the leaf's formula
    under any linear metric.
    """
    d = comp.d
    full = (1 << d) - 1
    feats = comp.features
    value = comp.leaf.leaf_value
    for pos in range(1 << d):
        if max_positive_arity is not None and bin(pos).count("1") > max_positive_arity:
            continue
        rest = full ^ pos
        for neg in _subsets_of(rest):
            weight = value * comp.coverage[neg] if neg == rest else 0.0
            yield Cube(
                s_plus=frozenset(feats[i] for i in range(d) if pos >> i & 1),
                s_minus=frozenset(feats[i] for i in range(d) if neg >> i & 1),
                weight=float(weight),
            )


def evaluate_metric(comp: LeafCompilation, metric) -> list:
    """Build the per-consumer-mask table of metric aggregates for one leaf.

    For each mass-carrying cube (positive set P, negatives the rest) the
    weighted unit-metric map lands in a per-P accumulator; a subset-sum
    pass then folds accumulators into ``table[m] = sum over P <= m``,
    which is exactly the contribution a consumer with condition mask m
    receives from this leaf.  Stored on ``comp.metric_table`` and reused
    for every consumer row.
    """
    d = comp.d
    full = (1 << d) - 1
    cap = metric.max_positive_arity
    feats = comp.features
    value = comp.leaf.leaf_value
    table: list[dict] = [dict() for _ in range(1 << d)]
    for pos in range(1 << d):
        if cap is not None and bin(pos).count("1") > cap:
            continue
        neg = full ^ pos
        weight = value * comp.coverage[neg]
        if weight == 0.0:
            continue
        s_plus = frozenset(feats[i] for i in range(d) if pos >> i & 1)
        s_minus = frozenset(feats[i] for i in range(d) if neg >> i & 1)
        unit = metric.cube_values(s_plus, s_minus)
        if unit:
            entry = table[pos]
            for key, v in unit.items():
                val = weight * v
                if not math.isfinite(val):
                    raise NumericError(
                        f"metric produced non-finite value {val!r} on cube "
                        f"pos={sorted(s_plus)} neg={sorted(s_minus)} "
                        f"(tree {comp.tree_index}, leaf node {comp.leaf.node_ids[-1]})"
                    )
                entry[key] = entry.get(key, 0.0) + val
    for i in range(d):
        bit = 1 << i
        for m in range(1 << d):
            if m & bit:
                src = table[m ^ bit]
                if src:
                    dst = table[m]
                    for key, v in src.items():
                        dst[key] = dst.get(key, 0.0) + v
    comp.metric_table = table
    return table


def aggregate_consumers(comps: list, C: np.ndarray) -> list:
    """Sum each consumer row's table entries across all compiled leaves.

    Returns one {subset key: value} dict per row.  Tables must have been
    built by :func:`evaluate_metric` first.
    """
    C = np.asarray(C, dtype=np.float64)
    out: list[dict] = [dict() for _ in range(len(C))]
    for comp in comps:
        if comp.metric_table is None:
            raise InputError("metric table missing; run evaluate_metric first")
        _accumulate_rows(comp, comp.consumer_masks(C), out)
    return out


def _accumulate_rows(comp: LeafCompilation, masks: np.ndarray, out: list) -> None:
    table = comp.metric_table
    for r, m in enumerate(masks):
        entry = table[m]
        if entry:
            acc = out[r]
            for key, v in entry.items():
                acc[key] = acc.get(key, 0.0) + v


def cpdv_accumulate(comp: LeafCompilation, masks: np.ndarray, out: np.ndarray) -> None:
    """Closed-form centered-dependence accumulation for one leaf.

    Feature g_i of a consumer with condition mask m receives
    ``w * (coverage[all but i] * [i in m] - coverage[all])``; features off
    the path receive exactly zero.  Equivalent to the generic metric-table
    route for the centered metric, vectorized over consumer rows.
    """
    d = comp.d
    w = comp.leaf.leaf_value
    if d == 0 or w == 0.0:
        return
    full = (1 << d) - 1
    cov = comp.coverage
    pos_w = np.array([w * cov[full ^ (1 << i)] for i in range(d)])
    neg_w = w * cov[full]
    bits_matrix = (masks[:, None] >> np.arange(d)[None, :]) & 1
    contrib = bits_matrix * pos_w[None, :] - neg_w
    out[:, list(comp.features)] += contrib


def compile_ensemble(
    ensemble: TreeEnsemble,
    mode: str,
    B: np.ndarray | None = None,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
) -> list:
    """Compile every reachable leaf of every tree for the given mode."""
    paths = extract_paths(ensemble)
    # fail fast on any over-capacity path before materializing any table
    for tree_index, leaf in paths:
        _check_capacity(leaf, tree_index, mask_capacity)
    comps = []
    for tree_index, leaf in paths:
        if mode == "exact":
            if B is None:
                raise InputError("exact mode requires a background dataset")
            comps.append(
                compile_leaf_background(leaf, B, tree_index, mask_capacity)
            )
        elif mode == "approx":
            comps.append(
                compile_leaf_pathdep(
                    leaf, ensemble.trees[tree_index], tree_index, mask_capacity
                )
            )
        else:
            raise InputError(f"unknown mode {mode!r}")
    return comps


def expected_leaf_value(comps: list) -> float:
    """Sum of leaf values weighted by full-path coverage.

    With background coverage this is the mean prediction over B (minus
    base score); with path-dependent weights it is the cover-weighted
    expected prediction.
    """
    return float(sum(c.leaf.leaf_value * c.coverage[(1 << c.d) - 1] for c in comps))


def wdnf_assignment_value(comps: list, row: np.ndarray, features) -> float:
    """Debug entry point: evaluate the compiled formula at a 0/1 assignment.

    ``features`` is the participation set S.  For each leaf, the only
    surviving cube is the one whose positive set matches S's slots, gated
    on the consumer satisfying those conditions.  The caller adds the
    model's base score.
    """
    fset = set(features)
    row2d = np.asarray(row, dtype=np.float64)[None, :]
    total = 0.0
    for comp in comps:
        a_mask = 0
        for i, f in enumerate(comp.features):
            if f in fset:
                a_mask |= 1 << i
        m_c = int(comp.consumer_masks(row2d)[0])
        if a_mask & ~m_c:
            continue
        full = (1 << comp.d) - 1
        total += comp.leaf.leaf_value * comp.coverage[full ^ a_mask]
    return total


def dump_leaf_debug(comp: LeafCompilation, max_positive_arity: int | None = None) -> str:
    """JSON dump of a leaf's conditions, coverage table, and cube stream.

    Unbounded interval ends serialize as null so the output is strict JSON.
    """
    doc = {
        "tree": comp.tree_index,
        "leaf_node": comp.leaf.node_ids[-1],
        "leaf_value": comp.leaf.leaf_value,
        "conditions": [
            {
                "feature": c.feature,
                "lo": None if c.lo == -math.inf else c.lo,
                "hi": None if c.hi == math.inf else c.hi,
            }
            for c in comp.leaf.conditions
        ],
        "coverage": [float(x) for x in comp.coverage],
        "cubes": [c.to_debug_dict() for c in enumerate_cubes(comp, max_positive_arity)],
    }
    return json.dumps(doc, allow_nan=False)


class EngineRun:
    """Shared driver: compile trees, evaluate a metric, aggregate rows.

    Work is split per tree; with ``threads > 1`` trees are processed in a
    thread pool and partial results are merged in tree order, so output
    is identical to the sequential run.
    """

    def __init__(
        self,
        ensemble: TreeEnsemble,
        mode: str,
        B: np.ndarray | None,
        threads: int = 1,
        mask_capacity: int = DEFAULT_MASK_CAPACITY,
    ):
        if mode not in ("exact", "approx"):
            raise InputError(f"unknown mode {mode!r}")
        if mode == "exact" and (B is None or len(B) == 0):
            raise InputError("exact mode requires a non-empty background dataset")
        self.ensemble = ensemble
        self.mode = mode
        self.B = np.asarray(B, dtype=np.float64) if B is not None else None
        self.threads = max(1, int(threads))
        self.mask_capacity = mask_capacity
        self._paths_by_tree: list[list[LeafPath]] | None = None

    def _paths(self) -> list[list[LeafPath]]:
        if self._paths_by_tree is None:
            by_tree: list[list[LeafPath]] = [[] for _ in self.ensemble.trees]
            for t_idx, leaf in extract_paths(self.ensemble):
                _check_capacity(leaf, t_idx, self.mask_capacity)
                by_tree[t_idx].append(leaf)
            self._paths_by_tree = by_tree
        return self._paths_by_tree

    def _compile_tree(self, t_idx: int) -> list:
        comps = []
        for leaf in self._paths()[t_idx]:
            if self.mode == "exact":
                comps.append(
                    compile_leaf_background(leaf, self.B, t_idx, self.mask_capacity)
                )
            else:
                comps.append(
                    compile_leaf_pathdep(
                        leaf, self.ensemble.trees[t_idx], t_idx, self.mask_capacity
                    )
                )
        return comps

    def _walk_tree(self, t_idx: int, C: np.ndarray):
        """Yield (compilation, consumer_masks) per leaf via one shared
        incremental descent over background and consumer rows."""
        tree = self.ensemble.trees[t_idx]
        # structural pre-pass: surface capacity violations anywhere in the
        # tree before any coverage table is allocated
        for _ in walk_tree_masks(tree, [], t_idx, self.mask_capacity):
            pass
        matrices = [self.B, C] if self.mode == "exact" else [C]
        m = len(self.B) if self.mode == "exact" else 0
        for leaf, masks in walk_tree_masks(tree, matrices, t_idx, self.mask_capacity):
            if self.mode == "exact":
                d = len(leaf.conditions)
                hist = np.bincount(masks[0], minlength=1 << d).astype(np.float64)
                comp = LeafCompilation(
                    leaf=leaf,
                    tree_index=t_idx,
                    d=d,
                    coverage=superset_sum(hist) / m,
                )
                yield comp, masks[1]
            else:
                comp = compile_leaf_pathdep(leaf, tree, t_idx, self.mask_capacity)
                yield comp, masks[0]

    def _map_trees(self, worker):
        indices = range(len(self.ensemble.trees))
        if self.threads == 1:
            return [worker(i) for i in indices]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(worker, indices))

    def expected_value(self) -> float:
        """Coverage-weighted mean prediction, excluding the base score."""
        self._paths()  # materialize before any parallel access

        def worker(t_idx: int) -> float:
            return expected_leaf_value(self._compile_tree(t_idx))

        return float(sum(self._map_trees(worker)))

    def run_cpdv(self, C: np.ndarray) -> np.ndarray:
        """Centered dependence values, one row per consumer row, one
        column per model feature (vectorized fast path)."""
        C = np.asarray(C, dtype=np.float64)
        self._check_consumer(C)
        n_features = self.ensemble.n_features

        def worker(t_idx: int) -> np.ndarray:
            part = np.zeros((len(C), n_features), dtype=np.float64)
            for comp, masks_c in self._walk_tree(t_idx, C):
                cpdv_accumulate(comp, masks_c, part)
            return part

        out = np.zeros((len(C), n_features), dtype=np.float64)
        for part in self._map_trees(worker):
            out += part
        return out

    def run_metric(self, C: np.ndarray, metric) -> list:
        """Generic sparse aggregation: one {subset: value} dict per row,
        processed one tree at a time."""
        C = np.asarray(C, dtype=np.float64)
        self._check_consumer(C)
        out: list[dict] = [dict() for _ in range(len(C))]

        def worker(t_idx: int) -> list:
            part: list[dict] = [dict() for _ in range(len(C))]
            for comp, masks_c in self._walk_tree(t_idx, C):
                evaluate_metric(comp, metric)
                _accumulate_rows(comp, masks_c, part)
                comp.metric_table = None
            return part

        for part in self._map_trees(worker):
            for acc, extra in zip(out, part):
                for key, v in extra.items():
                    acc[key] = acc.get(key, 0.0) + v
        return out

    def _check_consumer(self, C: np.ndarray) -> None:
        if C.ndim != 2 or C.shape[1] < self.ensemble.n_features:
            raise InputError(
                f"consumer table of shape {C.shape} does not cover the model's "
                f"{self.ensemble.n_features} features"
            )
