# distutils: language = c++
"""Compiled tree grower (hot kernel of the random forest).

Bit-for-bit twin of ``_splitter_py.py``: same splitmix64 feature-sampling
stream, same split-score arithmetic, same node layout. Keep the two files
in lockstep.
"""

from libcpp.vector cimport vector
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort

import numpy as np

ctypedef unsigned long long u64
ctypedef long long i64

BACKEND = "compiled"


cdef inline u64 _splitmix_next(u64* state) noexcept nogil:
    cdef u64 z
    state[0] = state[0] + <u64>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef bint _evaluate_feature(double[:, ::1] X, i64[::1] y, i64[::1] samples,
                            i64 start, i64 end, i64 f, i64 min_node,
                            vector[pair[double, i64]]& buf,
                            double* out_score, double* out_thr) noexcept:
    cdef i64 m = end - start
    cdef i64 i, nl, nr, c0l, c1r, c0r
    cdef i64 c1_total = 0, c1l = 0
    cdef double score, best = 0.0, thr_best = 0.0
    cdef bint found = False

    buf.clear()
    for i in range(start, end):
        buf.push_back(pair[double, i64](X[samples[i], f], y[samples[i]]))
    sort(buf.begin(), buf.end())
    if buf[0].first == buf[m - 1].first:
        return False
    for i in range(m):
        c1_total += buf[i].second

    for i in range(m - 1):
        c1l += buf[i].second
        if buf[i].first == buf[i + 1].first:
            continue
        nl = i + 1
        nr = m - nl
        if nl < min_node or nr < min_node:
            continue
        c0l = nl - c1l
        c1r = c1_total - c1l
        c0r = nr - c1r
        score = (<double>(c0l * c0l + c1l * c1l) / <double>nl
                 + <double>(c0r * c0r + c1r * c1r) / <double>nr)
        if not found or score > best:
            found = True
            best = score
            thr_best = (buf[i].first + buf[i + 1].first) / 2.0
    if not found:
        return False
    out_score[0] = best
    out_thr[0] = thr_best
    return True


def grow_tree(X, y, rows, mtry, seed, min_node_size=1):
    """Grow one deterministic binary classification tree.

    Same contract and output as the pure-Python fallback: parallel node
    arrays (feature, threshold, left, right, count0, count1), feature == -1
    marking leaves, nodes in depth-first order with the left child first.
    """
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef i64[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef i64[::1] samples = np.array(rows, dtype=np.int64)
    cdef i64 p = Xv.shape[1]
    cdef i64 n_node = samples.shape[0]
    cdef u64 state = <u64>seed
    cdef i64 mtry_c = mtry
    cdef i64 min_node = min_node_size
    cdef i64 k = mtry_c if mtry_c < p else p

    cdef vector[i64] feature, left, right, count0, count1
    cdef vector[double] threshold
    cdef vector[i64] stack_start, stack_end, stack_parent, stack_is_left
    cdef vector[i64] perm
    cdef vector[i64] tmp
    cdef vector[pair[double, i64]] buf

    cdef i64 start, end, parent, is_left, nid, i, j, m, c0, c1, f
    cdef i64 best_feature, nl
    cdef u64 r
    cdef double score, thr, best_score = 0.0, best_thr = 0.0
    cdef bint found, ok

    perm.resize(p)

    stack_start.push_back(0)
    stack_end.push_back(n_node)
    stack_parent.push_back(-1)
    stack_is_left.push_back(0)

    while stack_start.size() > 0:
        start = stack_start.back(); stack_start.pop_back()
        end = stack_end.back(); stack_end.pop_back()
        parent = stack_parent.back(); stack_parent.pop_back()
        is_left = stack_is_left.back(); stack_is_left.pop_back()

        nid = <i64>feature.size()
        feature.push_back(-1)
        threshold.push_back(0.0)
        left.push_back(-1)
        right.push_back(-1)
        if parent >= 0:
            if is_left:
                left[parent] = nid
            else:
                right[parent] = nid

        m = end - start
        c1 = 0
        for i in range(start, end):
            c1 += yv[samples[i]]
        c0 = m - c1
        count0.push_back(c0)
        count1.push_back(c1)
        if c0 == 0 or c1 == 0 or m < 2 or m < 2 * min_node:
            continue

        # Partial Fisher-Yates; primary = first k slots, rest = leftovers.
        for i in range(p):
            perm[i] = i
        for i in range(k):
            r = _splitmix_next(&state)
            j = i + <i64>(r % <u64>(p - i))
            perm[i], perm[j] = perm[j], perm[i]
        sort(perm.begin(), perm.begin() + k)
        sort(perm.begin() + k, perm.end())

        found = False
        best_feature = -1
        for i in range(k):
            f = perm[i]
            ok = _evaluate_feature(Xv, yv, samples, start, end, f, min_node,
                                   buf, &score, &thr)
            if ok and (not found or score > best_score):
                found = True
                best_score = score
                best_thr = thr
                best_feature = f
        if not found:
            for i in range(k, p):
                f = perm[i]
                ok = _evaluate_feature(Xv, yv, samples, start, end, f, min_node,
                                       buf, &score, &thr)
                if ok:
                    found = True
                    best_thr = thr
                    best_feature = f
                    break
        if not found:
            continue

        # Stable partition: rows with value <= threshold go left.
        tmp.clear()
        nl = 0
        for i in range(start, end):
            if Xv[samples[i], best_feature] <= best_thr:
                tmp.push_back(samples[i])
                nl += 1
        for i in range(start, end):
            if Xv[samples[i], best_feature] > best_thr:
                tmp.push_back(samples[i])
        for i in range(m):
            samples[start + i] = tmp[i]

        feature[nid] = best_feature
        threshold[nid] = best_thr
        stack_start.push_back(start + nl)
        stack_end.push_back(end)
        stack_parent.push_back(nid)
        stack_is_left.push_back(0)
        stack_start.push_back(start)
        stack_end.push_back(start + nl)
        stack_parent.push_back(nid)
        stack_is_left.push_back(1)

    cdef i64 n_nodes = <i64>feature.size()
    feature_arr = np.empty(n_nodes, dtype=np.int32)
    threshold_arr = np.empty(n_nodes, dtype=np.float64)
    left_arr = np.empty(n_nodes, dtype=np.int32)
    right_arr = np.empty(n_nodes, dtype=np.int32)
    count0_arr = np.empty(n_nodes, dtype=np.int64)
    count1_arr = np.empty(n_nodes, dtype=np.int64)
    for i in range(n_nodes):
        feature_arr[i] = feature[i]
        threshold_arr[i] = threshold[i]
        left_arr[i] = left[i]
        right_arr[i] = right[i]
        count0_arr[i] = count0[i]
        count1_arr[i] = count1[i]
    return feature_arr, threshold_arr, left_arr, right_arr, count0_arr, count1_arr
