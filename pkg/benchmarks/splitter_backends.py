"""Compare the compiled tree-growing kernel against the pure-Python fallback.

Grows identical forests with both backends on a synthetic recall dataset,
checks that every tree is bit-for-bit identical, and reports per-tree
timings. Run as:

    python benchmarks/splitter_backends.py [--trees N] [--seed S]
"""

import argparse
import time

import numpy as np

from pathlens.baselines import _splitter_py
from pathlens.dataset import encode_indicators
from pathlens.model_spec import builtin_recall_model
from pathlens.synth import default_synth_config, generate_synthetic

try:
    from pathlens.baselines import _splitter as compiled
except ImportError:
    compiled = None


def _grow_all(grow, X, y, mtry, trees, seed):
    out = []
    start = time.perf_counter()
    for t in range(trees):
        rng = np.random.default_rng([seed, t])
        rows = rng.integers(0, X.shape[0], X.shape[0])
        out.append(grow(X, y, rows, mtry, int(rng.integers(1 << 63))))
    return out, time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trees", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = builtin_recall_model()
    encoded = encode_indicators(generate_synthetic(default_synth_config(args.seed)), spec)
    feature_names = [c for c in encoded.column_names if c != "recall"]
    X = np.ascontiguousarray(encoded.take_columns(feature_names).values)
    y = encoded.column("recall").astype(np.int64)
    mtry = max(1, int(np.sqrt(X.shape[1])))
    print(f"dataset: {X.shape[0]} rows, {X.shape[1]} features, mtry={mtry}, "
          f"{args.trees} trees")

    python_trees, python_time = _grow_all(
        _splitter_py.grow_tree, X, y, mtry, args.trees, args.seed
    )
    print(f"python   backend: {python_time:8.3f}s total, "
          f"{1e3 * python_time / args.trees:7.2f} ms/tree")

    if compiled is None:
        print("compiled backend: not built (pip install -e . with Cython available)")
        return

    compiled_trees, compiled_time = _grow_all(
        compiled.grow_tree, X, y, mtry, args.trees, args.seed
    )
    print(f"compiled backend: {compiled_time:8.3f}s total, "
          f"{1e3 * compiled_time / args.trees:7.2f} ms/tree "
          f"({python_time / compiled_time:4.1f}x faster)")

    for i, (a, b) in enumerate(zip(compiled_trees, python_trees)):
        for arr_a, arr_b in zip(a, b):
            if not np.array_equal(np.asarray(arr_a), np.asarray(arr_b)):
                raise SystemExit(f"tree {i}: backends disagree")
    print(f"all {args.trees} trees bit-for-bit identical across backends")


if __name__ == "__main__":
    main()
