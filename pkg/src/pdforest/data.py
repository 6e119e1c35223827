"""Tabular data and the consumer-dataset constructions behind each task.

Three grid builders live here: the k-point per-feature grid used for
standard PDPs, the threshold-derived grid that makes the plotted step
function exact everywhere (full PDP), and the compressed pairwise dataset
for joint PDPs whose size is ``k^2 * ceil(log2 f)`` instead of ``k^2 * f``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import IngestionError, InputError
from .model import TreeEnsemble

GridMode = ("quantile", "uniform", "thresholds")


@dataclass
class Dataset:
    """Rectangular, fully numeric table with a canonical column order."""

    columns: tuple[str, ...]
    rows: np.ndarray
    role: str = ""

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise IngestionError(f"expected a 2-D table, got shape {self.rows.shape}")
        if self.rows.shape[1] != len(self.columns):
            raise IngestionError(
                f"{len(self.columns)} column names but {self.rows.shape[1]} data columns"
            )
        if not np.isfinite(self.rows).all():
            raise IngestionError("table contains missing or non-finite cells")

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.rows[:, i]


def load_csv(path, role: str = "") -> Dataset:
    """Read a header-plus-numeric-body CSV (RFC-4180 subset, '.' decimal)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        columns = tuple(name.strip() for name in header)
        data: list[list[float]] = []
        for r, rec in enumerate(reader, start=2):
            if len(rec) != len(columns):
                raise IngestionError(
                    f"{path}: row {r} has {len(rec)} cells, expected {len(columns)}"
                )
            vals = []
            for c, cell in enumerate(rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {r}, column '{columns[c]}': non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise IngestionError(
                        f"{path}: row {r}, column '{columns[c]}': non-finite cell {cell!r}"
                    )
                vals.append(v)
            data.append(vals)
    if not data:
        raise IngestionError(f"{path}: no data rows")
    return Dataset(columns=columns, rows=np.asarray(data, dtype=np.float64), role=role)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.columns)
        for row in dataset.rows:
            writer.writerow([repr(float(v)) for v in row])


@dataclass
class ValueGrid:
    """Per-feature sampled plot values, sorted and deduplicated."""

    values: list[np.ndarray]
    sampling_mode: str

    def __post_init__(self):
        if self.sampling_mode not in GridMode:
            raise InputError(f"unknown sampling mode {self.sampling_mode!r}")
        self.values = [np.unique(np.asarray(v, dtype=np.float64)) for v in self.values]

    def to_json(self) -> str:
        return json.dumps(
            {
                "sampling_mode": self.sampling_mode,
                "values": [[float(x) for x in v] for v in self.values],
            }
        )


def _sample_column(col: np.ndarray, k: int, mode: str) -> np.ndarray:
    if mode == "quantile":
        qs = np.array([0.5]) if k == 1 else np.linspace(0.0, 1.0, k)
        return np.quantile(col, qs)
    if mode == "uniform":
        if k == 1:
            return np.array([(col.min() + col.max()) / 2.0])
        return np.linspace(col.min(), col.max(), k)
    raise InputError(f"unknown sampling mode {mode!r}")


def build_pdp_grid(B: Dataset, k: int, mode: str = "quantile") -> tuple[ValueGrid, Dataset]:
    """Sample k values per feature and pack them into a k-row consumer table.

    Row t of the consumer table holds the t-th sampled value of every
    feature, so one engine pass evaluates all features' plots at once.
    The consumer keeps exactly k rows even when a column is constant;
    deduplication happens only in the returned grid.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if B.n_rows < 1:
        raise InputError("background dataset is empty")
    cols = [_sample_column(B.column(i), k, mode) for i in range(B.n_features)]
    C = Dataset(columns=B.columns, rows=np.column_stack(cols), role="consumer")
    return ValueGrid(values=cols, sampling_mode=mode), C


def build_model_grid(ensemble: TreeEnsemble, columns: tuple[str, ...], k: int,
                     mode: str = "quantile") -> tuple[ValueGrid, Dataset]:
    """Grid for the path-dependent mode, sampled from split thresholds only.

    The approximate pipeline never reads a background dataset, so plot
    values come from each feature's own thresholds: quantiles of the
    threshold list, or evenly spaced points across its range.  Features
    the model never splits on get a constant zero column (their centered
    values are identically zero anyway).
    """
    if k < 1:
        raise InputError("k must be >= 1")
    cols = []
    for i in range(len(columns)):
        ths = ensemble.thresholds_for(i)
        if len(ths) == 0:
            cols.append(np.zeros(k))
        elif len(ths) == 1:
            # straddle the single threshold so both plateaus are visible
            pts = np.array([ths[0] - 1.0, ths[0] + 1.0])
            cols.append(_sample_column(pts, k, "uniform" if mode == "uniform" else "quantile"))
        else:
            cols.append(_sample_column(ths, k, mode))
    C = Dataset(columns=columns, rows=np.column_stack(cols), role="consumer")
    return ValueGrid(values=cols, sampling_mode=mode), C


@dataclass
class RaggedGrid:
    """Per-feature evaluation points with unequal lengths.

    ``packed()`` pads every column to the longest one by repeating its
    last value, which lets a single consumer table serve all features;
    callers slice each feature's result back to ``lengths[i]`` rows.
    """

    eval_values: list[np.ndarray]

    @property
    def lengths(self) -> list[int]:
        return [len(v) for v in self.eval_values]

    def packed(self, columns: tuple[str, ...]) -> Dataset:
        n = max((len(v) for v in self.eval_values), default=0)
        if n == 0:
            raise InputError("model has no splits; full grid is empty")
        cols = []
        for v in self.eval_values:
            if len(v) == 0:
                cols.append(np.zeros(n))
            else:
                cols.append(np.concatenate([v, np.full(n - len(v), v[-1])]))
        return Dataset(columns=columns, rows=np.column_stack(cols), role="consumer")


def build_full_pdp_grid(ensemble: TreeEnsemble, B: Dataset | None = None
                        ) -> tuple[ValueGrid, RaggedGrid]:
    """Threshold grid making the emitted step function exact everywhere.

    The grid values are each feature's sorted distinct split thresholds.
    The evaluation points additionally include one representative inside
    every open interval between consecutive thresholds and one point
    beyond each extreme, so every constant segment of the model's
    piecewise dependence is evaluated regardless of tie convention.
    Features never split on get empty lists.
    """
    n_features = B.n_features if B is not None else ensemble.n_features
    grid_vals: list[np.ndarray] = []
    eval_vals: list[np.ndarray] = []
    for i in range(n_features):
        ths = ensemble.thresholds_for(i)
        grid_vals.append(ths)
        if len(ths) == 0:
            eval_vals.append(np.array([], dtype=np.float64))
            continue
        pts = [ths[0] - 1.0]
        for j, t in enumerate(ths):
            pts.append(t)
            if j + 1 < len(ths):
                pts.append((t + ths[j + 1]) / 2.0)
        pts.append(ths[-1] + 1.0)
        eval_vals.append(np.asarray(pts, dtype=np.float64))
    return ValueGrid(values=grid_vals, sampling_mode="thresholds"), RaggedGrid(eval_vals)


def bits(i: int, width: int) -> list[int]:
    """Binary representation of ``i``, most significant bit first,
    zero-padded to exactly ``width`` digits."""
    if width < 0 or i < 0 or i >= (1 << width):
        raise InputError(f"bits({i}, {width}): index out of range")
    return [(i >> (width - 1 - b)) & 1 for b in range(width)]


@dataclass
class PairBlockMap:
    """Which row block of the joint consumer table covers each feature pair.

    Pair (i, j) with i < j maps to block ``h`` = the first differing bit
    of the two feature indices' binary codes; its rows are
    ``[h*k^2, (h+1)*k^2)``.  Within the block the smaller-index feature's
    values vary fastest (tiled) and the larger's slowest (repeated).
    """

    k: int
    code_width: int
    n_rows: int

    def block_index(self, i: int, j: int) -> int:
        if i == j:
            raise InputError("diagonal pairs are excluded")
        a, b = min(i, j), max(i, j)
        for h, (ba, bb) in enumerate(zip(bits(a, self.code_width), bits(b, self.code_width))):
            if ba != bb:
                return h
        raise InputError(f"features {i} and {j} share a binary code")

    def row_range(self, i: int, j: int) -> tuple[int, int]:
        h = self.block_index(i, j)
        return h * self.k * self.k, (h + 1) * self.k * self.k

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "code_width": self.code_width, "n_rows": self.n_rows})


def build_joint_grid(df: Dataset) -> tuple[Dataset, PairBlockMap]:
    """Expand a k-row grid into the compressed all-pairs consumer table.

    Column i is laid out in ``ceil(log2 f)`` blocks of k^2 rows: block b
    tiles the column when bit b of the feature's code is 0 and repeats
    each element k times when it is 1.  Any two features differ in some
    bit, so some block pairs a tiled column with a repeated one and thus
    contains every pair of sampled values.
    """
    k = df.n_rows
    f = df.n_features
    width = max(0, math.ceil(math.log2(f))) if f > 1 else 0
    n_rows = k * k * width
    if width == 0:
        empty = Dataset(columns=df.columns, rows=np.zeros((0, f)), role="consumer")
        return empty, PairBlockMap(k=k, code_width=0, n_rows=0)
    cols = []
    for i in range(f):
        blocks = []
        for b in bits(i, width):
            if b == 0:
                blocks.append(np.tile(df.column(i), k))
            else:
                blocks.append(np.repeat(df.column(i), k))
        cols.append(np.concatenate(blocks))
    C = Dataset(columns=df.columns, rows=np.column_stack(cols), role="consumer")
    return C, PairBlockMap(k=k, code_width=width, n_rows=n_rows)
