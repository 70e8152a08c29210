"""Pure-NumPy tree-growing kernel for the boosted propensity learner.

This is the fallback twin of the compiled kernel in `_boost_c.pyx`; both
implement the same split search with identical floating-point evaluation
order, so their outputs are bit-identical and interchangeable.

Trees are complete binary arrays of size 2**(depth+1) - 1; node i has
children 2i+1 / 2i+2, feature -1 marks a leaf, feature -2 an unused slot.
The split rule is `x[feature] <= threshold` goes left, with the threshold
stored as the left edge value (no midpoints, so the rule is exact).
"""

import numpy as np


def fit_tree(X, sort_idx, g, h, depth, min_leaf, lam):
    """Grow one Newton-step regression tree on gradients g and hessians h.

    `sort_idx` is the per-column stable argsort of X, computed once per
    boosting run. Returns (feature, threshold, value, leaf_of) where
    leaf_of maps each training row to its leaf node id.
    """
    n, k = X.shape
    m = 2 ** (depth + 1) - 1
    feature = np.full(m, -2, dtype=np.int32)
    threshold = np.zeros(m)
    value = np.zeros(m)
    node_of = np.zeros(n, dtype=np.int32)
    pending = {0}

    for level in range(depth + 1):
        level_lo = 2 ** level - 1
        level_hi = 2 ** (level + 1) - 1
        for nid in range(level_lo, level_hi):
            if nid not in pending:
                continue
            rows = np.flatnonzero(node_of == nid)
            cnt = rows.shape[0]
            # leaf stats accumulated in ascending row order (matches the C twin)
            gtot = float(np.cumsum(g[rows])[-1]) if cnt else 0.0
            htot = float(np.cumsum(h[rows])[-1]) if cnt else 0.0
            if level == depth or cnt < 2 * min_leaf:
                feature[nid] = -1
                value[nid] = gtot / (htot + lam)
                continue
            best_gain = 0.0
            best_feat = -1
            best_thr = 0.0
            for f in range(k):
                order = sort_idx[:, f]
                ridx = order[node_of[order] == nid]
                xv = X[ridx, f]
                gl = np.cumsum(g[ridx])
                hl = np.cumsum(h[ridx])
                gt = gl[-1]
                ht = hl[-1]
                counts = np.arange(1, cnt)
                valid = (
                    (xv[1:] > xv[:-1])
                    & (counts >= min_leaf)
                    & (cnt - counts >= min_leaf)
                )
                if not np.any(valid):
                    continue
                glp = gl[:-1]
                hlp = hl[:-1]
                gain = (
                    glp * glp / (hlp + lam)
                    + (gt - glp) * (gt - glp) / (ht - hlp + lam)
                    - gt * gt / (ht + lam)
                )
                gain = np.where(valid, gain, -np.inf)
                pos = int(np.argmax(gain))
                if gain[pos] > best_gain:
                    best_gain = float(gain[pos])
                    best_feat = f
                    best_thr = float(xv[pos])
            if best_feat < 0:
                feature[nid] = -1
                value[nid] = gtot / (htot + lam)
                continue
            feature[nid] = best_feat
            threshold[nid] = best_thr
            go_left = X[rows, best_feat] <= best_thr
            node_of[rows[go_left]] = 2 * nid + 1
            node_of[rows[~go_left]] = 2 * nid + 2
            pending.add(2 * nid + 1)
            pending.add(2 * nid + 2)
    return feature, threshold, value, node_of
