"""Numba kernels for the hot paths: tree fitting, forest prediction, and
candidate generation.

Trees are complete binary trees in heap layout (node i has children 2i+1,
2i+2). Nodes that do not split get a "dummy" split with threshold +inf,
which routes every row left, so prediction is a fixed-depth branchless walk.
All kernels are single-threaded so results never depend on thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

N_FEATURES = 8


@njit(cache=True)
def forest_predict_rows(X, feat, thr, leaf, base, lr, depth):
    """Predict a (n, 8) feature matrix with a forest of complete trees.

    feat: (T, 2**depth - 1) int64, thr: same shape float64,
    leaf: (T, 2**depth) float64.
    """
    n = X.shape[0]
    n_trees = feat.shape[0]
    n_internal = feat.shape[1]
    out = np.empty(n)
    x = np.empty(N_FEATURES)
    for i in range(n):
        for j in range(N_FEATURES):
            x[j] = X[i, j]
        acc = 0.0
        for t in range(n_trees):
            node = 0
            for _ in range(depth):
                go_right = x[feat[t, node]] > thr[t, node]
                node = 2 * node + 1 + go_right
            acc += leaf[t, node - n_internal]
        out[i] = base + lr * acc
    return out


@njit(cache=True)
def forest_predict_candidates(
    u, slot, surv, pcost, cand, sigma_by_id, cost_by_id, cost_floor,
    feat, thr, leaf, base, lr, depth,
):
    """Q-values for every candidate of every row; padding (id < 0) -> -inf.

    Feature vector per (row, candidate): [budget, slot, survival,
    prefix_cost, sigma, cost, sigma * survival, sigma / max(cost, floor)].
    """
    n = u.shape[0]
    n_cand = cand.shape[1]
    n_trees = feat.shape[0]
    n_internal = feat.shape[1]
    out = np.full((n, n_cand), -np.inf)
    x = np.empty(N_FEATURES)
    for i in range(n):
        x[0] = u[i]
        x[1] = slot[i]
        x[2] = surv[i]
        x[3] = pcost[i]
        for j in range(n_cand):
            item = cand[i, j]
            if item < 0:
                continue
            sigma = sigma_by_id[item]
            cost = cost_by_id[item]
            x[4] = sigma
            x[5] = cost
            x[6] = sigma * surv[i]
            x[7] = sigma / max(cost, cost_floor)
            acc = 0.0
            for t in range(n_trees):
                node = 0
                for _ in range(depth):
                    go_right = x[feat[t, node]] > thr[t, node]
                    node = 2 * node + 1 + go_right
                acc += leaf[t, node - n_internal]
            out[i, j] = base + lr * acc
    return out


@njit(cache=True)
def build_candidates(u, prefix, plen, ratio_order, cost_by_id, top_m, rand_ids, out):
    """Fill ``out`` (n, top_m + R) with candidate item ids; returns counts.

    Top-``top_m`` affordable items by relevance-per-second (walking the
    precomputed ratio ordering), then the pre-drawn random affordable ids,
    skipping duplicates and anything already in the episode's prefix.
    Unused slots are -1.
    """
    n = u.shape[0]
    n_items = ratio_order.shape[0]
    n_rand = rand_ids.shape[1]
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        budget = u[i]
        k = 0
        if top_m > 0:
            for pos in range(n_items):
                item = ratio_order[pos]
                if cost_by_id[item] > budget:
                    continue
                in_prefix = False
                for p in range(plen[i]):
                    if prefix[i, p] == item:
                        in_prefix = True
                        break
                if in_prefix:
                    continue
                out[i, k] = item
                k += 1
                if k == top_m:
                    break
        for j in range(n_rand):
            item = rand_ids[i, j]
            if item < 0 or cost_by_id[item] > budget:
                continue
            dup = False
            for p in range(plen[i]):
                if prefix[i, p] == item:
                    dup = True
                    break
            if not dup:
                for q in range(k):
                    if out[i, q] == item:
                        dup = True
                        break
            if not dup:
                out[i, k] = item
                k += 1
        counts[i] = k
        for q in range(k, out.shape[1]):
            out[i, q] = -1
    return counts


@njit(cache=True)
def fit_tree(Xb, resid, n_bins, min_leaf, depth):
    """Fit one regression tree on binned features against residuals.

    Returns (feature, bin_threshold, is_real_split, leaf_values, sample_leaf):
    heap arrays for the internal nodes, per-leaf mean residuals, and the
    leaf value assigned to every training row (for the boosting update).
    Split selection maximizes the variance-reduction gain; ties keep the
    lowest feature index, then the lowest threshold.
    """
    n = Xb.shape[0]
    n_internal = 2 ** depth - 1
    n_leaf = 2 ** depth
    feature = np.zeros(n_internal, dtype=np.int64)
    bin_thr = np.zeros(n_internal, dtype=np.int64)
    is_real = np.zeros(n_internal, dtype=np.uint8)
    node_of = np.zeros(n, dtype=np.int64)

    max_level_nodes = 2 ** (depth - 1) if depth > 0 else 1
    hist_sum = np.empty((max_level_nodes, N_FEATURES, 256))
    hist_cnt = np.empty((max_level_nodes, N_FEATURES, 256), dtype=np.int64)

    for level in range(depth):
        first = 2 ** level - 1
        width = 2 ** level
        for nd in range(width):
            for f in range(N_FEATURES):
                for b in range(n_bins[f] + 1):
                    hist_sum[nd, f, b] = 0.0
                    hist_cnt[nd, f, b] = 0
        for i in range(n):
            nd = node_of[i] - first
            for f in range(N_FEATURES):
                b = Xb[i, f]
                hist_sum[nd, f, b] += resid[i]
                hist_cnt[nd, f, b] += 1
        for nd in range(width):
            total_sum = 0.0
            total_cnt = 0
            for b in range(n_bins[0] + 1):
                total_sum += hist_sum[nd, 0, b]
                total_cnt += hist_cnt[nd, 0, b]
            node = first + nd
            best_gain = 0.0
            best_f = -1
            best_b = -1
            if total_cnt >= 2 * min_leaf:
                parent_score = total_sum * total_sum / total_cnt
                for f in range(N_FEATURES):
                    run_sum = 0.0
                    run_cnt = 0
                    for b in range(n_bins[f]):  # split rule: bin <= b goes left
                        run_sum += hist_sum[nd, f, b]
                        run_cnt += hist_cnt[nd, f, b]
                        right_cnt = total_cnt - run_cnt
                        if run_cnt < min_leaf or right_cnt < min_leaf:
                            continue
                        right_sum = total_sum - run_sum
                        gain = (
                            run_sum * run_sum / run_cnt
                            + right_sum * right_sum / right_cnt
                            - parent_score
                        )
                        if gain > best_gain:
                            best_gain = gain
                            best_f = f
                            best_b = b
            if best_f >= 0:
                feature[node] = best_f
                bin_thr[node] = best_b
                is_real[node] = 1
            else:
                feature[node] = 0
                bin_thr[node] = 255  # dummy: everything goes left
        for i in range(n):
            node = node_of[i]
            go_right = Xb[i, feature[node]] > bin_thr[node]
            node_of[i] = 2 * node + 1 + go_right

    leaf_sum = np.zeros(n_leaf)
    leaf_cnt = np.zeros(n_leaf, dtype=np.int64)
    for i in range(n):
        lf = node_of[i] - n_internal
        leaf_sum[lf] += resid[i]
        leaf_cnt[lf] += 1
    leaf_values = np.zeros(n_leaf)
    for lf in range(n_leaf):
        if leaf_cnt[lf] > 0:
            leaf_values[lf] = leaf_sum[lf] / leaf_cnt[lf]
    sample_leaf = np.empty(n)
    for i in range(n):
        sample_leaf[i] = leaf_values[node_of[i] - n_internal]
    return feature, bin_thr, is_real, leaf_values, sample_leaf
