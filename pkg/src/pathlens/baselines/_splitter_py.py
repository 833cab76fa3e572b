"""Pure numpy tree grower; reference twin of the compiled splitter.

Both backends implement the exact same algorithm, including the internal
splitmix64 feature-sampling stream and the floating-point evaluation order
of the split score, so they produce bit-identical trees. Keep any change
here in lockstep with ``_splitter.pyx``.

Split score per candidate: sum over the two children of
(count0^2 + count1^2) / child_size, maximized; all counts are integers, so
the score is bitwise reproducible. Ties keep the lowest feature index, then
the smallest threshold (first maximum during the ascending scan). When none
of the ``mtry`` sampled features admits a valid split, the remaining
features are scanned in ascending index order and the first splittable one
is used, so a tree on distinct rows always grows until pure.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_MASK64 = (1 << 64) - 1


def _splitmix_next(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _sample_features(state: int, p: int, mtry: int) -> tuple[int, list[int], list[int]]:
    """Partial Fisher-Yates: mtry sampled features plus the leftover order."""
    arr = list(range(p))
    k = min(mtry, p)
    for i in range(k):
        state, r = _splitmix_next(state)
        j = i + r % (p - i)
        arr[i], arr[j] = arr[j], arr[i]
    return state, sorted(arr[:k]), sorted(arr[k:])


def _evaluate_feature(X, y, seg, f, min_node):
    """Best split of a node segment on one feature, or None."""
    vals = X[seg, f]
    order = np.argsort(vals, kind="stable")
    v = vals[order]
    if v[0] == v[-1]:
        return None
    lab = y[seg][order]
    m = len(seg)
    c1 = np.cumsum(lab)
    boundary = np.nonzero(v[:-1] != v[1:])[0]
    if min_node > 1:
        nl = boundary + 1
        boundary = boundary[(nl >= min_node) & (m - nl >= min_node)]
        if boundary.size == 0:
            return None
    nl = boundary + 1
    nr = m - nl
    c1l = c1[boundary]
    c0l = nl - c1l
    c1r = c1[-1] - c1l
    c0r = nr - c1r
    score = (c0l * c0l + c1l * c1l) / nl + (c0r * c0r + c1r * c1r) / nr
    i = int(np.argmax(score))
    b = int(boundary[i])
    threshold = (v[b] + v[b + 1]) / 2.0
    return float(score[i]), threshold


def grow_tree(X, y, rows, mtry, seed, min_node_size=1):
    """Grow one fully deterministic binary classification tree.

    Returns parallel node arrays (feature, threshold, left, right, count0,
    count1); feature == -1 marks a leaf. Nodes are laid out depth-first,
    left child before right.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    samples = np.array(rows, dtype=np.int64)
    p = X.shape[1]
    state = int(seed) & _MASK64

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    count0: list[int] = []
    count1: list[int] = []

    stack = [(0, len(samples), -1, False)]
    while stack:
        start, end, parent, is_left = stack.pop()
        nid = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        if parent >= 0:
            if is_left:
                left[parent] = nid
            else:
                right[parent] = nid

        seg = samples[start:end]
        c1 = int(y[seg].sum())
        c0 = len(seg) - c1
        count0.append(c0)
        count1.append(c1)
        if c0 == 0 or c1 == 0 or len(seg) < max(2, 2 * min_node_size):
            continue

        state, primary, rest = _sample_features(state, p, mtry)
        best = None
        best_feature = -1
        for f in primary:
            cand = _evaluate_feature(X, y, seg, f, min_node_size)
            if cand is not None and (best is None or cand[0] > best[0]):
                best = cand
                best_feature = f
        if best is None:
            for f in rest:
                cand = _evaluate_feature(X, y, seg, f, min_node_size)
                if cand is not None:
                    best = cand
                    best_feature = f
                    break
        if best is None:
            continue

        thr = best[1]
        mask = X[seg, best_feature] <= thr
        samples[start:end] = np.concatenate([seg[mask], seg[~mask]])
        nl = int(mask.sum())
        feature[nid] = best_feature
        threshold[nid] = thr
        stack.append((start + nl, end, nid, False))
        stack.append((start, start + nl, nid, True))

    return (
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(count0, dtype=np.int64),
        np.array(count1, dtype=np.int64),
    )
