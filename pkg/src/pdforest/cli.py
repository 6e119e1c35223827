"""Command-line surface: load model and data, run a task, write results.

Exit codes: 0 success, 2 usage or input error, 3 verification mismatch,
4 mask-capacity exceeded.  With ``--threads 1`` output files are
byte-identical across runs on identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys

import numpy as np

from .data import Dataset, load_csv
from .errors import CapacityError, PDForestError, VerificationError
from .model import TreeEnsemble, load_model
from .oracle import oracle_pdv
from .tasks import (
    DEFAULT_ROW_LIMIT,
    JointPDPResult,
    PDPResult,
    compute_full_pdp,
    compute_interaction_values,
    compute_joint_pdp,
    compute_pdp,
)

VERIFY_TOLERANCE = 1e-7
VERIFY_MAX_POINTS = 50
VERIFY_SEED = 94275


class UsageError(PDForestError):
    pass


def _fmt(x: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


def _default_threads() -> int:
    env = os.environ.get("PDFOREST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model dump (tree-dump-json)")
    p.add_argument("--background", help="background dataset CSV")
    p.add_argument("--mode", choices=("exact", "approx"), default="exact")
    p.add_argument("--out", required=True, help="output file path")
    p.add_argument("--threads", type=int, default=None,
                   help="engine parallelism (default: PDFOREST_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdforest",
        description="Partial dependence tools for decision tree ensembles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pdp = sub.add_parser("pdp", help="per-feature dependence curves")
    _add_common(pdp)
    pdp.add_argument("--k", type=int, default=None, help="sampled values per feature (default 5)")
    pdp.add_argument("--grid", choices=("quantile", "uniform", "full"), default="quantile")
    pdp.add_argument("--format", choices=("csv", "json"), default="csv")
    pdp.add_argument("--verify", action="store_true",
                     help="cross-check sampled points against the brute-force oracle")
    pdp.add_argument("--plot", action="store_true",
                     help="also write one SVG line plot per feature next to --out")

    joint = sub.add_parser("jointpdp", help="pairwise joint dependence grids")
    _add_common(joint)
    joint.add_argument("--k", type=int, default=None)
    joint.add_argument("--grid", choices=("quantile", "uniform", "full"), default="quantile")
    joint.add_argument("--format", choices=("csv", "json"), default="csv")
    joint.add_argument("--pairs", default="all",
                       help="'all' or pairs like 'f0,f1;f0,f2'")

    pdiv = sub.add_parser("pdiv", help="per-row any-order interaction values")
    pdiv.add_argument("--model", required=True)
    pdiv.add_argument("--consumer", required=True, help="consumer dataset CSV")
    pdiv.add_argument("--background", help="background CSV (omit for path-dependent mode)")
    pdiv.add_argument("--max-rows", type=int, default=DEFAULT_ROW_LIMIT)
    pdiv.add_argument("--aggregate", action="store_true",
                      help="emit per-subset means instead of per-row values")
    pdiv.add_argument("--out", required=True)
    pdiv.add_argument("--format", choices=("json",), default="json")
    pdiv.add_argument("--threads", type=int, default=None)

    return parser


def _load_inputs(args) -> tuple[TreeEnsemble, Dataset | None]:
    ensemble = load_model(args.model)
    background = None
    if args.background:
        if args.mode == "approx":
            print("warning: --background is ignored in approx mode", file=sys.stderr)
        else:
            background = load_csv(args.background, role="background")
    if args.mode == "exact" and background is None:
        raise UsageError("exact mode requires --background")
    return ensemble, background


def _write_pdp_csv(res: PDPResult, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "value", "pdv", "cpdv"])
        for name, v, p, cp in res.iter_rows():
            w.writerow([name, _fmt(v), _fmt(p), _fmt(cp)])


def _write_pdp_json(res: PDPResult, path: str) -> None:
    doc = {
        "mode": res.mode,
        "mean_prediction": res.mean_prediction,
        "features": [
            {
                "feature": c.name,
                "points": [
                    {"value": float(v), "pdv": float(p), "cpdv": float(cp)}
                    for v, p, cp in zip(c.values, c.pdv, c.cpdv)
                ],
            }
            for c in res.curves
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _plot_curves(res: PDPResult, out_path: str, step: bool) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "pdforest"
    stem, _ = os.path.splitext(out_path)
    for c in res.curves:
        if len(c.values) == 0:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        if step:
            ax.step(c.values, c.pdv, where="post")
        else:
            ax.plot(c.values, c.pdv, marker="o")
        ax.set_xlabel(c.name)
        ax.set_ylabel("partial dependence")
        ax.set_title(f"PDP: {c.name}")
        fig.tight_layout()
        safe = re.sub(r"[^A-Za-z0-9_.-]", "_", c.name)
        fig.savefig(f"{stem}_{safe}.svg", format="svg", metadata={"Date": None})
        plt.close(fig)


def _verify_pdp(res: PDPResult, ensemble: TreeEnsemble, background: Dataset) -> None:
    points = [
        (c.feature, float(v), float(p))
        for c in res.curves
        for v, p in zip(c.values, c.pdv)
    ]
    rng = np.random.default_rng(VERIFY_SEED)
    if len(points) > VERIFY_MAX_POINTS:
        idx = rng.choice(len(points), size=VERIFY_MAX_POINTS, replace=False)
        points = [points[i] for i in sorted(idx)]
    for feat, v, p in points:
        expected = oracle_pdv(ensemble, background.rows, {feat: v})
        if abs(expected - p) > VERIFY_TOLERANCE:
            raise VerificationError(
                f"feature {feat} at value {v!r}: engine {p!r} vs oracle "
                f"{expected!r} differs by {abs(expected - p):.3e}"
            )


def _cmd_pdp(args) -> int:
    ensemble, background = _load_inputs(args)
    threads = args.threads if args.threads is not None else _default_threads()
    if args.verify and args.mode != "exact":
        raise UsageError("--verify compares against the exact oracle; use --mode exact")
    if args.grid == "full":
        if args.k is not None:
            print("warning: --k is ignored with --grid full", file=sys.stderr)
        res = compute_full_pdp(ensemble, background, mode=args.mode, threads=threads)
    else:
        k = args.k if args.k is not None else 5
        res = compute_pdp(
            ensemble, background, k=k, mode=args.mode, grid_mode=args.grid,
            threads=threads,
        )
    if args.verify:
        _verify_pdp(res, ensemble, background)
    if args.format == "csv":
        _write_pdp_csv(res, args.out)
    else:
        _write_pdp_json(res, args.out)
    if args.plot:
        _plot_curves(res, args.out, step=args.grid == "full")
    return 0


def _parse_pairs(spec: str, columns: tuple[str, ...]) -> list | None:
    if spec == "all":
        return None
    index = {name: i for i, name in enumerate(columns)}
    pairs = []
    for chunk in spec.split(";"):
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 2:
            raise UsageError(f"bad pair {chunk!r}; expected 'nameA,nameB'")
        for p in parts:
            if p not in index:
                raise UsageError(f"unknown feature {p!r} in --pairs")
        pairs.append((index[parts[0]], index[parts[1]]))
    return pairs


def _write_joint_csv(res: JointPDPResult, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["f_a", "f_b", "a_value", "b_value", "pdv"])
        for na, nb, a, b, p in res.iter_rows():
            w.writerow([na, nb, _fmt(a), _fmt(b), _fmt(p)])


def _write_joint_json(res: JointPDPResult, path: str) -> None:
    doc = {
        "mode": res.mode,
        "k": res.k,
        "mean_prediction": res.mean_prediction,
        "pairs": [
            {
                "f_a": p.name_a,
                "f_b": p.name_b,
                "a_values": [float(x) for x in p.values_a],
                "b_values": [float(x) for x in p.values_b],
                "pdv": [[float(x) for x in row] for row in p.matrix],
            }
            for p in res.pairs
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _cmd_jointpdp(args) -> int:
    ensemble, background = _load_inputs(args)
    threads = args.threads if args.threads is not None else _default_threads()
    if args.grid == "full":
        raise UsageError("--grid full is not supported for joint plots; use quantile or uniform")
    k = args.k if args.k is not None else 5
    columns = background.columns if background is not None else tuple(ensemble.feature_names)
    pairs = _parse_pairs(args.pairs, columns)
    res = compute_joint_pdp(
        ensemble, background, k=k, mode=args.mode, grid_mode=args.grid,
        pairs=pairs, threads=threads,
    )
    if args.format == "csv":
        _write_joint_csv(res, args.out)
    else:
        _write_joint_json(res, args.out)
    return 0


def _cmd_pdiv(args) -> int:
    ensemble = load_model(args.model)
    consumer = load_csv(args.consumer, role="consumer")
    background = load_csv(args.background, role="background") if args.background else None
    threads = args.threads if args.threads is not None else _default_threads()
    res = compute_interaction_values(
        ensemble, consumer, background,
        row_limit=args.max_rows, aggregate=args.aggregate, threads=threads,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        if res.aggregate:
            obj = {
                "rows": res.n_rows_processed,
                "mode": res.mode,
                "pdiv": [
                    {"features": list(key), "value": v}
                    for key, v in res.rows[0].items()
                ],
            }
            fh.write(json.dumps(obj) + "\n")
        else:
            for i, acc in enumerate(res.rows):
                obj = {
                    "row": i,
                    "pdiv": [
                        {"features": list(key), "value": v} for key, v in acc.items()
                    ],
                }
                fh.write(json.dumps(obj) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"pdp": _cmd_pdp, "jointpdp": _cmd_jointpdp, "pdiv": _cmd_pdiv}
    try:
        return handlers[args.command](args)
    except VerificationError as e:
        print(f"pdforest: verification failed: {e}", file=sys.stderr)
        return 3
    except CapacityError as e:
        print(f"pdforest: {e}", file=sys.stderr)
        return 4
    except (PDForestError, OSError) as e:
        print(f"pdforest: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
