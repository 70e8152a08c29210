# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled tree-growing kernel; bit-identical twin of `_boost_py.fit_tree`."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def fit_tree(double[:, ::1] X, int[:, ::1] sort_idx, double[::1] g,
             double[::1] h, int depth, int min_leaf, double lam):
    cdef int n = X.shape[0]
    cdef int k = X.shape[1]
    cdef int m = (1 << (depth + 1)) - 1

    feature_arr = np.full(m, -2, dtype=np.int32)
    threshold_arr = np.zeros(m)
    value_arr = np.zeros(m)
    node_of_arr = np.zeros(n, dtype=np.int32)
    cdef int[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef double[::1] value = value_arr
    cdef int[::1] node_of = node_of_arr

    pending_arr = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] pending = pending_arr
    pending[0] = 1

    cdef int level, nid, f, i, r, cnt, cleft
    cdef int best_feat, level_lo, level_hi
    cdef double gtot, htot, gt, ht, gl, hl, xcur, xprev
    cdef double gain, best_gain, best_thr, glp, hlp

    for level in range(depth + 1):
        level_lo = (1 << level) - 1
        level_hi = (1 << (level + 1)) - 1
        for nid in range(level_lo, level_hi):
            if not pending[nid]:
                continue
            gtot = 0.0
            htot = 0.0
            cnt = 0
            for r in range(n):
                if node_of[r] == nid:
                    gtot = gtot + g[r]
                    htot = htot + h[r]
                    cnt = cnt + 1
            if level == depth or cnt < 2 * min_leaf:
                feature[nid] = -1
                value[nid] = gtot / (htot + lam)
                continue
            best_gain = 0.0
            best_feat = -1
            best_thr = 0.0
            for f in range(k):
                # pass 1: totals in this feature's sort order (fp-order parity
                # with the NumPy twin's cumsum)
                gt = 0.0
                ht = 0.0
                for i in range(n):
                    r = sort_idx[i, f]
                    if node_of[r] == nid:
                        gt = gt + g[r]
                        ht = ht + h[r]
                # pass 2: scan split positions
                gl = 0.0
                hl = 0.0
                cleft = 0
                xprev = 0.0
                for i in range(n):
                    r = sort_idx[i, f]
                    if node_of[r] != nid:
                        continue
                    xcur = X[r, f]
                    if cleft > 0 and xcur > xprev:
                        if cleft >= min_leaf and cnt - cleft >= min_leaf:
                            glp = gl
                            hlp = hl
                            gain = (glp * glp / (hlp + lam)
                                    + (gt - glp) * (gt - glp) / (ht - hlp + lam)
                                    - gt * gt / (ht + lam))
                            if gain > best_gain:
                                best_gain = gain
                                best_feat = f
                                best_thr = xprev
                    gl = gl + g[r]
                    hl = hl + h[r]
                    cleft = cleft + 1
                    xprev = xcur
            if best_feat < 0:
                feature[nid] = -1
                value[nid] = gtot / (htot + lam)
                continue
            feature[nid] = best_feat
            threshold[nid] = best_thr
            for r in range(n):
                if node_of[r] == nid:
                    if X[r, best_feat] <= best_thr:
                        node_of[r] = 2 * nid + 1
                    else:
                        node_of[r] = 2 * nid + 2
            pending[2 * nid + 1] = 1
            pending[2 * nid + 2] = 1
    return feature_arr, threshold_arr, value_arr, node_of_arr
