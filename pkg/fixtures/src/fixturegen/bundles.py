"""Build and write fixture bundles.

Each bundle directory contains the exported model dump, the datasets it
was built from, golden reference outputs, and a manifest with the seed,
library versions, and per-file SHA-256 hashes.  Every byte is a pure
function of the bundle config, so rebuilding from the manifest's seed
reproduces the bundle exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np
import sklearn
from sklearn.datasets import make_friedman1
from sklearn.ensemble import GradientBoostingRegressor

from .export import assert_no_threshold_ties, export_model
from .reference import brute_joint, brute_pdivs_up_to_size, brute_pdp, quantile_grid

DEFAULT_OUT_DIR = Path(__file__).resolve().parents[2] / "bundles"

CONFIGS = {
    "toy_stump": {
        "seed": 11,
        "n_estimators": 1,
        "max_depth": 1,
        "learning_rate": 1.0,
        "dataset": "two_clusters",
        "n_rows": 100,
        "n_features": 1,
        "k": 5,
        "n_consumer": 10,
        "joint_pairs": 0,
        "pdiv_rows": 0,
    },
    "gbm100": {
        "seed": 17,
        "n_estimators": 100,
        "max_depth": 6,
        "learning_rate": 0.1,
        "dataset": "friedman1",
        "n_rows": 1000,
        "n_features": 10,
        "k": 5,
        "n_consumer": 100,
        "joint_pairs": 10,
        "pdiv_rows": 0,
    },
    "pdiv10": {
        "seed": 23,
        "n_estimators": 30,
        "max_depth": 3,
        "learning_rate": 0.1,
        "dataset": "friedman1",
        "n_rows": 10_000,
        "n_features": 10,
        "k": 5,
        "n_consumer": 100,
        "joint_pairs": 0,
        "pdiv_rows": 5,
    },
}


def _make_data(config: dict) -> tuple[np.ndarray, np.ndarray]:
    n, f, seed = config["n_rows"], config["n_features"], config["seed"]
    if config["dataset"] == "two_clusters":
        rng = np.random.default_rng(seed)
        lo = np.full(2 * n // 5, -1.0)
        hi = np.full(n - len(lo), 1.0)
        x = np.concatenate([lo, hi])
        rng.shuffle(x)
        return x[:, None], (x > 0).astype(np.float64)
    if config["dataset"] == "friedman1":
        X, y = make_friedman1(n_samples=n, n_features=f, noise=1.0,
                              random_state=seed)
        return X, y
    raise ValueError(f"unknown dataset kind {config['dataset']!r}")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_bundle(name: str, out_dir: Path) -> Path:
    config = CONFIGS[name]
    bundle_dir = out_dir / name
    bundle_dir.mkdir(parents=True, exist_ok=True)

    X, y = _make_data(config)
    feature_names = [f"f{i}" for i in range(X.shape[1])]
    est = GradientBoostingRegressor(
        n_estimators=config["n_estimators"],
        max_depth=config["max_depth"],
        learning_rate=config["learning_rate"],
        random_state=config["seed"],
    )
    est.fit(X, y)

    doc = export_model(est, feature_names)
    background = X
    consumer = X[: config["n_consumer"]]
    k = config["k"]
    grid_matrix = np.column_stack(
        [quantile_grid(background[:, i], k) for i in range(X.shape[1])]
    )
    assert_no_threshold_ties(
        doc,
        {"train": X, "background": background, "consumer": consumer,
         "pdp_grid": grid_matrix},
    )

    (bundle_dir / "model.json").write_text(json.dumps(doc), encoding="utf-8")
    _write_csv(bundle_dir / "train.csv", feature_names, X)
    _write_csv(bundle_dir / "background.csv", feature_names, background)
    _write_csv(bundle_dir / "consumer.csv", feature_names, consumer)

    predictions = est.predict(consumer)
    _write_csv(
        bundle_dir / "golden_predictions.csv",
        ["row", "prediction"],
        [(i, p) for i, p in enumerate(predictions)],
    )
    (bundle_dir / "golden_mean.json").write_text(
        json.dumps({"mean_prediction": float(np.mean(est.predict(background)))})
        + "\n",
        encoding="utf-8",
    )
    _write_csv(
        bundle_dir / "golden_pdp_k5.csv",
        ["feature", "value", "pdv"],
        [(feature_names[f], v, p)
         for f, v, p in brute_pdp(est.predict, background, k=k)],
    )

    if config["joint_pairs"]:
        rng = np.random.default_rng(config["seed"] + 1)
        all_pairs = [(i, j) for i in range(X.shape[1]) for j in range(i + 1, X.shape[1])]
        chosen = [all_pairs[i] for i in sorted(
            rng.choice(len(all_pairs), size=config["joint_pairs"], replace=False)
        )]
        _write_csv(
            bundle_dir / "golden_joint_pairs.csv",
            ["f_a", "f_b", "a_value", "b_value", "pdv"],
            [(feature_names[fa], feature_names[fb], a, b, p)
             for fa, fb, a, b, p in brute_joint(est.predict, background, chosen, k=k)],
        )

    if config["pdiv_rows"]:
        rows_doc = []
        for r in range(config["pdiv_rows"]):
            values = brute_pdivs_up_to_size(est.predict, background, consumer[r])
            rows_doc.append(
                {
                    "row": r,
                    "pdiv": [
                        {"features": list(S), "value": v}
                        for S, v in sorted(values.items())
                    ],
                }
            )
        (bundle_dir / "golden_pdivs.json").write_text(
            "\n".join(json.dumps(obj) for obj in rows_doc) + "\n",
            encoding="utf-8",
        )

    files = sorted(p.name for p in bundle_dir.iterdir() if p.name != "manifest.json")
    manifest = {
        "name": name,
        "config": config,
        "python_version": sys.version.split()[0],
        "sklearn_version": sklearn.__version__,
        "numpy_version": np.__version__,
        "files": {f: _sha256(bundle_dir / f) for f in files},
    }
    (bundle_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    return bundle_dir


def check_library_versions(manifest: dict) -> None:
    """Warn (never fail) when the installed reference libraries drift from
    the versions recorded at generation time."""
    if manifest.get("sklearn_version") != sklearn.__version__:
        warnings.warn(
            f"manifest mismatch: goldens were generated with scikit-learn "
            f"{manifest.get('sklearn_version')}, installed is {sklearn.__version__}",
            stacklevel=2,
        )
    if manifest.get("numpy_version") != np.__version__:
        warnings.warn(
            f"manifest mismatch: goldens were generated with numpy "
            f"{manifest.get('numpy_version')}, installed is {np.__version__}",
            stacklevel=2,
        )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pdforest-fixtures",
        description="Regenerate committed fixture bundles",
    )
    parser.add_argument("--bundle", choices=[*CONFIGS, "all"], default="all")
    parser.add_argument("--out-dir", type=Path, default=DEFAULT_OUT_DIR)
    args = parser.parse_args(argv)
    names = list(CONFIGS) if args.bundle == "all" else [args.bundle]
    for name in names:
        path = build_bundle(name, args.out_dir)
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
