"""Random forest classifier: bagged, fully grown Gini trees.

Configuration mirrors the benchmark setup: 500 trees, floor(sqrt(p))
features sampled per split, bootstrap resampling, nodes grown until pure.
Class probability is the fraction of trees voting for class 1. Everything
is a deterministic function of (data, config, seed); per-tree randomness
comes from independent substreams keyed by (seed, tree index).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..dataset import EncodedMatrix
from ..errors import DataError
from ..predictions import PredictionSet, threshold_labels
from ..runtime import map_indexed, worker_count
from ._backend import BACKEND, grow_tree


@dataclass
class ForestConfig:
    tree_count: int = 500
    features_per_split: int | None = None  # None -> max(1, floor(sqrt(p)))
    bootstrap: bool = True
    min_node_size: int = 1
    seed: int = 0


@dataclass
class Tree:
    feature: np.ndarray  # int32, -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    count0: np.ndarray
    count1: np.ndarray


@dataclass
class ForestModel:
    trees: list[Tree]
    feature_names: list[str]
    features_per_split: int
    seed: int
    backend: str = field(default=BACKEND)


def resolve_features_per_split(cfg: ForestConfig, p: int) -> int:
    mtry = cfg.features_per_split
    if mtry is None:
        mtry = max(1, math.floor(math.sqrt(p)))
    if not 1 <= mtry <= p:
        raise DataError(f"features_per_split={mtry} outside [1, {p}]")
    return mtry


def fit_forest(m: EncodedMatrix, labels, cfg: ForestConfig) -> ForestModel:
    X = np.ascontiguousarray(m.values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n, p = X.shape
    if n == 0:
        raise DataError("empty input")
    if y.shape[0] != n:
        raise DataError(f"{y.shape[0]} labels for {n} rows")
    if cfg.tree_count < 1:
        raise DataError("tree_count must be >= 1")
    mtry = resolve_features_per_split(cfg, p)

    def one_tree(t: int) -> Tree:
        rng = np.random.default_rng([cfg.seed, t])
        if cfg.bootstrap:
            rows = rng.integers(0, n, n)
        else:
            rows = np.arange(n, dtype=np.int64)
        tree_seed = int(rng.integers(1 << 63))
        return Tree(*grow_tree(X, y, rows, mtry, tree_seed, cfg.min_node_size))

    trees = map_indexed(one_tree, range(cfg.tree_count), worker_count())
    return ForestModel(
        trees=trees,
        feature_names=list(m.column_names),
        features_per_split=mtry,
        seed=cfg.seed,
    )


def _tree_votes(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Class-1 vote of one tree for every row (leaf majority, ties -> 1)."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = tree.feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        nd = node[idx]
        go_left = X[idx, tree.feature[nd]] <= tree.threshold[nd]
        node[idx] = np.where(go_left, tree.left[nd], tree.right[nd])
        active = tree.feature[node] >= 0
    return (tree.count1[node] >= tree.count0[node]).astype(np.float64)


def predict_forest(
    f: ForestModel, m: EncodedMatrix, truth=None
) -> PredictionSet:
    if list(m.column_names) != f.feature_names:
        raise DataError(
            f"feature columns {m.column_names} do not match training columns "
            f"{f.feature_names}"
        )
    X = np.ascontiguousarray(m.values, dtype=np.float64)
    votes = np.zeros(X.shape[0])
    for tree in f.trees:
        votes += _tree_votes(tree, X)
    probability = votes / len(f.trees)
    if truth is None:
        truth = np.full(X.shape[0], -1, dtype=np.int64)
    return PredictionSet(
        probability=probability,
        label=threshold_labels(probability),
        truth=truth,
        raw=probability,
    )


def _node_to_dict(tree: Tree, node: int) -> dict:
    # Iterative construction; fully grown trees can be deep.
    memo: dict[int, dict] = {}
    stack = [node]
    while stack:
        nid = stack[-1]
        if tree.feature[nid] < 0:
            memo[nid] = {
                "leaf": {
                    "count0": int(tree.count0[nid]),
                    "count1": int(tree.count1[nid]),
                }
            }
            stack.pop()
            continue
        left, right = int(tree.left[nid]), int(tree.right[nid])
        pending = [c for c in (left, right) if c not in memo]
        if pending:
            stack.extend(pending)
            continue
        memo[nid] = {
            "split": {
                "feature": int(tree.feature[nid]),
                "threshold": float(tree.threshold[nid]),
                "left": memo[left],
                "right": memo[right],
            }
        }
        stack.pop()
    return memo[node]


def forest_to_json(f: ForestModel) -> str:
    document = {
        "feature_names": f.feature_names,
        "features_per_split": f.features_per_split,
        "seed": f.seed,
        "trees": [_node_to_dict(tree, 0) for tree in f.trees],
    }
    return json.dumps(document, sort_keys=True)
