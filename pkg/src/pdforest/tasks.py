"""End-to-end pipelines: PDP curves (exact and approximate), full PDPs,
joint PDPs, and per-row any-order interaction values."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import (
    Dataset,
    ValueGrid,
    build_full_pdp_grid,
    build_joint_grid,
    build_model_grid,
    build_pdp_grid,
)
from .engine import DEFAULT_MASK_CAPACITY, EngineRun
from .errors import InputError
from .metrics import PdivMetric, PdivUpToPairsMetric
from .model import TreeEnsemble

DEFAULT_ROW_LIMIT = 10_000


@dataclass
class FeatureCurve:
    """One feature's plot: aligned value / dependence / centered arrays."""

    feature: int
    name: str
    values: np.ndarray
    pdv: np.ndarray
    cpdv: np.ndarray


@dataclass
class PDPResult:
    mode: str
    mean_prediction: float
    curves: list[FeatureCurve]
    grid: ValueGrid | None = None

    def curve_for(self, name: str) -> FeatureCurve:
        for c in self.curves:
            if c.name == name:
                return c
        raise KeyError(name)

    def iter_rows(self):
        for c in self.curves:
            for v, p, cp in zip(c.values, c.pdv, c.cpdv):
                yield c.name, float(v), float(p), float(cp)


@dataclass
class PairGrid:
    """Joint dependence of one unordered feature pair on a k x k value grid.

    ``matrix[i][j]`` is the average prediction with ``feature_a`` pinned
    to ``values_a[i]`` and ``feature_b`` pinned to ``values_b[j]``.
    """

    feature_a: int
    feature_b: int
    name_a: str
    name_b: str
    values_a: np.ndarray
    values_b: np.ndarray
    matrix: np.ndarray


@dataclass
class JointPDPResult:
    mode: str
    k: int
    mean_prediction: float
    pairs: list[PairGrid]

    def pair_for(self, name_a: str, name_b: str) -> PairGrid:
        for p in self.pairs:
            if {p.name_a, p.name_b} == {name_a, name_b}:
                return p
        raise KeyError((name_a, name_b))

    def iter_rows(self):
        for p in self.pairs:
            for i, a in enumerate(p.values_a):
                for j, b in enumerate(p.values_b):
                    yield p.name_a, p.name_b, float(a), float(b), float(p.matrix[i, j])


@dataclass
class AttributionResult:
    """Sparse per-row maps from sorted feature-index tuples to values."""

    rows: list
    mode: str
    n_background: int
    model_hash: str
    aggregate: bool = False
    n_rows_processed: int = 0


def mean_prediction(ensemble: TreeEnsemble, B: Dataset | np.ndarray) -> float:
    """Arithmetic mean of the model's prediction over the background rows."""
    rows = B.rows if isinstance(B, Dataset) else np.asarray(B, dtype=np.float64)
    if rows.ndim != 2 or len(rows) < 1:
        raise InputError("mean_prediction requires a non-empty background dataset")
    return float(np.mean(ensemble.predict_batch(rows)))


def _dedupe_curve(values: np.ndarray, pdv: np.ndarray, cpdv: np.ndarray):
    """Drop repeated grid values (identical rows produce identical results)."""
    if len(values) == 0:
        return values, pdv, cpdv
    keep = np.concatenate([[True], np.diff(values) != 0])
    return values[keep], pdv[keep], cpdv[keep]


def _resolve_grid(
    ensemble: TreeEnsemble,
    background: Dataset | None,
    k: int,
    mode: str,
    grid_mode: str,
):
    if mode == "exact":
        if background is None:
            raise InputError("exact mode requires a background dataset")
        return build_pdp_grid(background, k, grid_mode)
    columns = tuple(ensemble.feature_names)
    return build_model_grid(ensemble, columns, k, grid_mode)


def _mean_for_mode(
    ensemble: TreeEnsemble, run: EngineRun, background: Dataset | None, mode: str
) -> float:
    if mode == "exact":
        return mean_prediction(ensemble, background)
    return run.expected_value() + ensemble.base_score


def _cpdv_matrix(run: EngineRun, C: Dataset, ensemble: TreeEnsemble) -> np.ndarray:
    """Engine centered values widened to the dataset's column count.

    Columns beyond the model's feature range are untouched null players
    and stay exactly zero.
    """
    raw = run.run_cpdv(C.rows)
    if C.n_features == raw.shape[1]:
        return raw
    out = np.zeros((len(raw), C.n_features), dtype=np.float64)
    out[:, : raw.shape[1]] = raw
    return out


def compute_pdp(
    ensemble: TreeEnsemble,
    background: Dataset | None = None,
    k: int = 5,
    mode: str = "exact",
    grid_mode: str = "quantile",
    threads: int = 1,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
) -> PDPResult:
    """Per-feature dependence curves at k sampled values.

    Exact mode marginalizes over the background dataset; approximate mode
    uses per-node training-cover ratios instead and never reads the
    background (its grid comes from the model's own split thresholds).
    """
    if k < 1:
        raise InputError("k must be >= 1")
    grid, C = _resolve_grid(ensemble, background, k, mode, grid_mode)
    run = EngineRun(
        ensemble,
        mode,
        background.rows if (mode == "exact" and background is not None) else None,
        threads=threads,
        mask_capacity=mask_capacity,
    )
    cpdv = _cpdv_matrix(run, C, ensemble)
    mean = _mean_for_mode(ensemble, run, background, mode)
    used = set(ensemble.used_features())
    curves = []
    for i, name in enumerate(C.columns):
        if mode != "exact" and i not in used:
            curves.append(
                FeatureCurve(i, name, np.array([]), np.array([]), np.array([]))
            )
            continue
        v, pd, cpd = _dedupe_curve(C.rows[:, i], cpdv[:, i] + mean, cpdv[:, i])
        curves.append(FeatureCurve(i, name, v, pd, cpd))
    return PDPResult(mode=mode, mean_prediction=mean, curves=curves, grid=grid)


def compute_full_pdp(
    ensemble: TreeEnsemble,
    background: Dataset | None = None,
    mode: str = "exact",
    threads: int = 1,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
) -> PDPResult:
    """Dependence curves evaluated at every split threshold (plus interval
    representatives), exactly recovering the model's step behavior.

    Features the model never splits on get empty curves.
    """
    grid, ragged = build_full_pdp_grid(
        ensemble, background if mode == "exact" else None
    )
    columns = (
        background.columns if (mode == "exact" and background is not None)
        else tuple(ensemble.feature_names)
    )
    if mode == "exact" and background is None:
        raise InputError("exact mode requires a background dataset")
    run = EngineRun(
        ensemble,
        mode,
        background.rows if mode == "exact" else None,
        threads=threads,
        mask_capacity=mask_capacity,
    )
    mean = _mean_for_mode(ensemble, run, background, mode)
    if max(ragged.lengths, default=0) == 0:
        # constant model: nothing to plot for any feature
        empty = np.array([])
        curves = [FeatureCurve(i, name, empty, empty, empty)
                  for i, name in enumerate(columns)]
        return PDPResult(mode=mode, mean_prediction=mean, curves=curves, grid=grid)
    C = ragged.packed(columns)
    cpdv = _cpdv_matrix(run, C, ensemble)
    curves = []
    for i, name in enumerate(columns):
        n = ragged.lengths[i]
        vals = C.rows[:n, i]
        cp = cpdv[:n, i]
        curves.append(FeatureCurve(i, name, vals, cp + mean, cp))
    return PDPResult(mode=mode, mean_prediction=mean, curves=curves, grid=grid)


def step_value(curve: FeatureCurve, x: float) -> float:
    """Evaluate a full-PDP curve as the step function it represents.

    The dependence is constant on half-open inter-threshold segments;
    the curve's evaluation points cover every segment, so the value at x
    is the value at the rightmost evaluation point not greater than x.
    """
    if len(curve.values) == 0:
        raise InputError(f"feature {curve.name} has no splits")
    idx = int(np.searchsorted(curve.values, x, side="right")) - 1
    idx = max(idx, 0)
    return float(curve.pdv[idx])


def compute_joint_pdp(
    ensemble: TreeEnsemble,
    background: Dataset | None = None,
    k: int = 5,
    mode: str = "exact",
    grid_mode: str = "quantile",
    pairs: list | None = None,
    threads: int = 1,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
) -> JointPDPResult:
    """k x k joint dependence grids for feature pairs.

    Runs the engine once on the compressed all-pairs consumer table with
    the order-two interaction metric, then recomposes each pair's grid
    from its interaction, the two first-order terms, and the mean.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    grid, df = _resolve_grid(ensemble, background, k, mode, grid_mode)
    f = df.n_features
    if f < 2:
        raise InputError("joint dependence requires at least two features")
    C, blocks = build_joint_grid(df)
    run = EngineRun(
        ensemble,
        mode,
        background.rows if mode == "exact" else None,
        threads=threads,
        mask_capacity=mask_capacity,
    )
    rows = run.run_metric(C.rows, PdivUpToPairsMetric())
    mean = _mean_for_mode(ensemble, run, background, mode)

    if pairs is None:
        wanted = [(i, j) for i in range(f) for j in range(i + 1, f)]
    else:
        wanted = []
        for a, b in pairs:
            if a == b:
                raise InputError("diagonal pairs are excluded")
            if not (0 <= a < f and 0 <= b < f):
                raise InputError(f"feature pair ({a}, {b}) out of range")
            wanted.append((min(a, b), max(a, b)))

    out = []
    for a, b in wanted:
        start, stop = blocks.row_range(a, b)
        vals = np.empty(k * k, dtype=np.float64)
        key_ab = (a, b)
        key_a = (a,)
        key_b = (b,)
        for r_local, r in enumerate(range(start, stop)):
            rv = rows[r]
            vals[r_local] = (
                rv.get(key_ab, 0.0) + rv.get(key_a, 0.0) + rv.get(key_b, 0.0) + mean
            )
        # within a block the smaller-index feature is tiled (varies fastest)
        matrix = vals.reshape(k, k).T.copy()
        out.append(
            PairGrid(
                feature_a=a,
                feature_b=b,
                name_a=df.columns[a],
                name_b=df.columns[b],
                values_a=df.rows[:, a].copy(),
                values_b=df.rows[:, b].copy(),
                matrix=matrix,
            )
        )
    return JointPDPResult(mode=mode, k=k, mean_prediction=mean, pairs=out)


def compute_interaction_values(
    ensemble: TreeEnsemble,
    consumer: Dataset,
    background: Dataset | None = None,
    row_limit: int = DEFAULT_ROW_LIMIT,
    aggregate: bool = False,
    threads: int = 1,
    mask_capacity: int = DEFAULT_MASK_CAPACITY,
) -> AttributionResult:
    """All non-zero interaction values for every consumer row and every
    feature subset.

    An absent (or empty) background dataset selects the path-dependent
    approximation.  Rows past ``row_limit`` are dropped with a warning;
    trees are processed one at a time so peak memory stays bounded by one
    tree's tables plus the running output.
    """
    if consumer.n_rows < 1:
        raise InputError("consumer dataset is empty")
    mode = "exact" if background is not None and background.n_rows > 0 else "approx"
    rows_in = consumer.rows
    if len(rows_in) > row_limit:
        warnings.warn(
            f"consumer has {len(rows_in)} rows; processing the first {row_limit}",
            stacklevel=2,
        )
        rows_in = rows_in[:row_limit]
    run = EngineRun(
        ensemble,
        mode,
        background.rows if mode == "exact" else None,
        threads=threads,
        mask_capacity=mask_capacity,
    )
    raw = run.run_metric(rows_in, PdivMetric())
    base = ensemble.base_score
    cleaned = []
    for acc in raw:
        if base != 0.0:
            acc[()] = acc.get((), 0.0) + base
        cleaned.append({key: v for key, v in sorted(acc.items()) if v != 0.0})
    result_rows = cleaned
    if aggregate:
        agg: dict = {}
        for acc in cleaned:
            for key, v in acc.items():
                agg[key] = agg.get(key, 0.0) + v
        n = len(cleaned)
        result_rows = [{key: v / n for key, v in sorted(agg.items())}]
    return AttributionResult(
        rows=result_rows,
        mode=mode,
        n_background=background.n_rows if background is not None else 0,
        model_hash=ensemble.model_hash(),
        aggregate=aggregate,
        n_rows_processed=len(rows_in),
    )
