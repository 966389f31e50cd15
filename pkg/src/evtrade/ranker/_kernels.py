"""Compiled inner loops for the boosted ranker.

Every kernel releases the GIL and writes only to the slice of the output it
is given, so callers can split work across threads by contiguous ranges.
"""

from __future__ import annotations

import math

import numba
import numpy as np

# pair contributions are snapped to this grid so per-query sums are exact
LAMBDA_SCALE = 2.0**40
HESSIAN_FLOOR = 1e-12

OBJ_LAMBDARANK = 0
OBJ_PAIRWISE = 1


@numba.njit(cache=True, nogil=True)
def _idcg(y, k, disc):
    """Ideal DCG@k of integer labels ``y`` (counting sort, no allocation)."""
    top = 0
    for v in y:
        top = max(top, v)
    total = 0.0
    p = 0
    for grade in range(top, 0, -1):
        gain = 2.0**grade - 1.0
        for v in y:
            if v == grade:
                if p >= k:
                    return total
                total += gain * disc[p]
                p += 1
    return total


@numba.njit(cache=True, nogil=True)
def _rank_desc(s, order):
    """Stable insertion sort of ``s`` descending into ``order[:s.size]``."""
    n = s.size
    for i in range(n):
        j = i
        while j > 0 and s[order[j - 1]] < s[i]:
            order[j] = order[j - 1]
            j -= 1
        order[j] = i


@numba.njit(cache=True, nogil=True)
def _max_query(ptr, q_lo, q_hi):
    max_n = 1
    for q in range(q_lo, q_hi):
        max_n = max(max_n, ptr[q + 1] - ptr[q])
    return max_n


@numba.njit(cache=True, nogil=True)
def _discounts(n):
    disc = np.empty(n)
    for p in range(n):
        disc[p] = 1.0 / math.log2(p + 2.0)
    return disc


@numba.njit(cache=True, nogil=True)
def lambdas_range(scores, labels, ptr, q_lo, q_hi, objective, sigma, lam, hess):
    """Ascent-direction lambdas and hessians for queries ``q_lo..q_hi``."""
    max_n = _max_query(ptr, q_lo, q_hi)
    disc = _discounts(max_n)
    order = np.empty(max_n, dtype=np.int64)
    pos = np.empty(max_n, dtype=np.int64)
    gains = np.empty(max_n)
    for q in range(q_lo, q_hi):
        lo, hi = ptr[q], ptr[q + 1]
        n = hi - lo
        for i in range(lo, hi):
            lam[i] = 0.0
            hess[i] = 0.0
        if n < 2:
            continue
        s = scores[lo:hi]
        y = labels[lo:hi]
        inv_idcg = 0.0
        if objective == OBJ_LAMBDARANK:
            idcg = _idcg(y, n, disc)
            if idcg == 0.0:
                continue
            inv_idcg = 1.0 / idcg
            _rank_desc(s, order)
            for p in range(n):
                pos[order[p]] = p
                gains[p] = 2.0 ** y[p]
        for i in range(n):
            for j in range(n):
                if y[i] <= y[j]:
                    continue
                rho = 1.0 / (1.0 + math.exp(sigma * (s[i] - s[j])))
                if objective == OBJ_LAMBDARANK:
                    w = abs((gains[i] - gains[j]) * (disc[pos[i]] - disc[pos[j]])) * inv_idcg
                else:
                    w = 1.0
                g = np.rint(sigma * rho * w * LAMBDA_SCALE) / LAMBDA_SCALE
                h = sigma * sigma * rho * (1.0 - rho) * w
                lam[lo + i] += g
                lam[lo + j] -= g
                hess[lo + i] += h
                hess[lo + j] += h


@numba.njit(cache=True, nogil=True)
def ndcg_range(scores, labels, ptr, q_lo, q_hi, k, out):
    """Per-query NDCG@k into ``out``; NaN marks queries with zero ideal DCG."""
    max_n = _max_query(ptr, q_lo, q_hi)
    disc = _discounts(max(max_n, k))
    order = np.empty(max_n, dtype=np.int64)
    for q in range(q_lo, q_hi):
        lo, hi = ptr[q], ptr[q + 1]
        y = labels[lo:hi]
        idcg = _idcg(y, k, disc)
        if idcg == 0.0:
            out[q] = np.nan
            continue
        _rank_desc(scores[lo:hi], order)
        dcg = 0.0
        for p in range(min(k, hi - lo)):
            dcg += (2.0 ** y[order[p]] - 1.0) * disc[p]
        out[q] = dcg / idcg


@numba.njit(cache=True, nogil=True)
def predict_range(X, feature, threshold, left, right, value, roots, lr, lo, hi, out):
    """Add ``lr * leaf`` of every tree, in order, to ``out[lo:hi]``."""
    for r in range(lo, hi):
        acc = out[r]
        for t in range(roots.size):
            node = roots[t]
            while left[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += lr * value[node]
        out[r] = acc


@numba.njit(cache=True, nogil=True)
def subset_orders(presorted, mask, m):
    """Presorted row indices restricted to the sampled rows."""
    out = np.empty((presorted.shape[0], m), dtype=np.int64)
    for k in range(presorted.shape[0]):
        c = 0
        col = presorted[k]
        for p in range(col.size):
            r = col[p]
            if mask[r]:
                out[k, c] = r
                c += 1
    return out


@numba.njit(cache=True, nogil=True)
def _midpoint(x0, x1):
    thr = 0.5 * (x0 + x1)
    return thr if thr < x1 else x0


@numba.njit(cache=True, nogil=True)
def _scan_sorted(col, g, h, rows, G, H, min_leaf, l2):
    """Best split of one feature by a left-to-right scan over sorted rows."""
    best_gain = 0.0
    best_thr = 0.0
    parent = G * G / (H + l2)
    size = rows.size
    gl = 0.0
    hl = 0.0
    for p in range(size - 1):
        r = rows[p]
        gl += g[r]
        hl += h[r]
        nl = p + 1
        if size - nl < min_leaf:
            break
        if nl < min_leaf:
            continue
        x0 = col[r]
        x1 = col[rows[p + 1]]
        if not x1 > x0:
            continue
        gr = G - gl
        hr = H - hl
        gain = 0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent)
        if gain > best_gain:
            best_gain = gain
            best_thr = _midpoint(x0, x1)
    return best_gain, best_thr


@numba.njit(cache=True, nogil=True)
def _scan_hist(hist, vals, G, H, size, min_leaf, l2):
    """Same scan over a per-unique-value histogram (rows: sum g, sum h, count)."""
    best_gain = 0.0
    best_thr = 0.0
    parent = G * G / (H + l2)
    gl = 0.0
    hl = 0.0
    nl = 0
    prev = -1
    for b in range(vals.size):
        c = hist[b, 2]
        if c == 0.0:
            continue
        if prev >= 0 and nl >= min_leaf:
            gr = G - gl
            hr = H - hl
            gain = 0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent)
            if gain > best_gain:
                best_gain = gain
                best_thr = _midpoint(vals[prev], vals[b])
        gl += hist[b, 0]
        hl += hist[b, 1]
        nl += int(c)
        prev = b
        if size - nl < min_leaf:
            break
    return best_gain, best_thr


@numba.njit(cache=True, nogil=True)
def _fill_hist(hist, codes, g, h, rows, low_feats, bin_off):
    hist[:, :] = 0.0
    for p in range(rows.size):
        r = rows[p]
        gr = g[r]
        hr = h[r]
        for k in range(low_feats.size):
            f = low_feats[k]
            b = bin_off[f] + codes[r, f]
            hist[b, 0] += gr
            hist[b, 1] += hr
            hist[b, 2] += 1.0


@numba.njit(cache=True, nogil=True)
def _node_split(XT, g, h, hist, bin_vals, bin_off, feats, high_pos, orders, s, e, G, H, min_leaf, l2):
    best_gain = 0.0
    best_fi = -1
    best_thr = 0.0
    for fi in range(feats.size):
        f = feats[fi]
        if high_pos[fi] < 0:
            lo, hi = bin_off[f], bin_off[f + 1]
            gain, thr = _scan_hist(hist[lo:hi], bin_vals[lo:hi], G, H, e - s, min_leaf, l2)
        else:
            gain, thr = _scan_sorted(XT[f], g, h, orders[high_pos[fi], s:e], G, H, min_leaf, l2)
        if gain > best_gain:
            best_gain = gain
            best_fi = fi
            best_thr = thr
    return best_gain, best_fi, best_thr


@numba.njit(cache=True, nogil=True)
def _partition(arr, s, e, go_left, buf):
    a = 0
    b = 0
    for p in range(s, e):
        r = arr[p]
        if go_left[r]:
            arr[s + a] = r
            a += 1
        else:
            buf[b] = r
            b += 1
    for q in range(b):
        arr[s + a + q] = buf[q]
    return a


@numba.njit(cache=True, nogil=True)
def build_tree(
    XT, codes, bin_vals, bin_off, g, h, rows, orders, feats, high_pos, low_feats, hists,
    max_leaves, max_depth, min_leaf, l2,
):
    """Best-first exact-greedy regression tree.

    ``rows`` holds the sampled row ids; ``orders`` the same rows presorted by
    each high-cardinality feature in use. Low-cardinality features are
    scanned through per-unique-value histograms, which yields exactly the
    same candidate thresholds (midpoints of consecutive distinct values in
    the node). Both arrays are partitioned in place. ``hists`` is scratch
    space with one slot per open leaf. Leaves grow in order of gain, ties by
    node id. Returns flat arrays (feature, threshold, left, right, value);
    ``left == -1`` marks a leaf.
    """
    n_max = 2 * max_leaves - 1
    feature = np.full(n_max, -1, dtype=np.int64)
    threshold = np.zeros(n_max)
    left = np.full(n_max, -1, dtype=np.int64)
    right = np.full(n_max, -1, dtype=np.int64)
    value = np.zeros(n_max)
    start = np.zeros(n_max, dtype=np.int64)
    end = np.zeros(n_max, dtype=np.int64)
    depth = np.zeros(n_max, dtype=np.int64)
    Gs = np.zeros(n_max)
    Hs = np.zeros(n_max)
    gain = np.zeros(n_max)
    split_fi = np.full(n_max, -1, dtype=np.int64)
    split_thr = np.zeros(n_max)
    slot = np.full(n_max, -1, dtype=np.int64)
    free = np.arange(hists.shape[0] - 1, -1, -1)
    n_free = free.size

    m = rows.size
    G = 0.0
    H = 0.0
    for p in range(m):
        G += g[rows[p]]
        H += h[rows[p]]
    end[0] = m
    Gs[0] = G
    Hs[0] = H
    n_nodes = 1
    if max_depth > 0 and m >= 2 * min_leaf:
        n_free -= 1
        slot[0] = free[n_free]
        _fill_hist(hists[slot[0]], codes, g, h, rows, low_feats, bin_off)
        gain[0], split_fi[0], split_thr[0] = _node_split(
            XT, g, h, hists[slot[0]], bin_vals, bin_off, feats, high_pos, orders, 0, m, G, H, min_leaf, l2
        )

    buf = np.empty(m, dtype=np.int64)
    go_left = np.zeros(XT.shape[1], dtype=np.bool_)
    n_leaves = 1
    while n_leaves < max_leaves:
        node = -1
        best = 0.0
        for c in range(n_nodes):
            if left[c] < 0 and split_fi[c] >= 0 and gain[c] > best:
                best = gain[c]
                node = c
        if node < 0:
            break
        s, e = start[node], end[node]
        f = feats[split_fi[node]]
        thr = split_thr[node]
        col = XT[f]
        for p in range(s, e):
            r = rows[p]
            go_left[r] = col[r] <= thr
        n_left = _partition(rows, s, e, go_left, buf)
        for k in range(orders.shape[0]):
            _partition(orders[k], s, e, go_left, buf)

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = thr
        left[node] = lc
        right[node] = rc
        start[lc], end[lc] = s, s + n_left
        start[rc], end[rc] = s + n_left, e
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1

        small, large = (lc, rc) if n_left <= e - s - n_left else (rc, lc)
        gs = 0.0
        hs = 0.0
        for p in range(start[small], end[small]):
            gs += g[rows[p]]
            hs += h[rows[p]]
        Gs[small], Hs[small] = gs, hs
        Gs[large], Hs[large] = Gs[node] - gs, Hs[node] - hs

        # the larger child inherits the parent's histogram minus the smaller one
        ps = slot[node]
        slot[node] = -1
        n_free -= 1
        ss = free[n_free]
        _fill_hist(hists[ss], codes, g, h, rows[start[small]:end[small]], low_feats, bin_off)
        for k in range(low_feats.size):
            ff = low_feats[k]
            for b in range(bin_off[ff], bin_off[ff + 1]):
                hists[ps, b, 0] -= hists[ss, b, 0]
                hists[ps, b, 1] -= hists[ss, b, 1]
                hists[ps, b, 2] -= hists[ss, b, 2]
        slot[small] = ss
        slot[large] = ps
        for c in (lc, rc):
            if depth[c] < max_depth and end[c] - start[c] >= 2 * min_leaf:
                gain[c], split_fi[c], split_thr[c] = _node_split(
                    XT, g, h, hists[slot[c]], bin_vals, bin_off, feats, high_pos, orders,
                    start[c], end[c], Gs[c], Hs[c], min_leaf, l2,
                )
            if split_fi[c] < 0:
                free[n_free] = slot[c]
                n_free += 1
                slot[c] = -1
        n_leaves += 1

    for c in range(n_nodes):
        if left[c] < 0:
            value[c] = -Gs[c] / (Hs[c] + l2)
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@numba.njit(cache=True, nogil=True)
def presort_columns(XT):
    out = np.empty(XT.shape, dtype=np.int64)
    for f in range(XT.shape[0]):
        out[f] = np.argsort(XT[f], kind="mergesort")
    return out
