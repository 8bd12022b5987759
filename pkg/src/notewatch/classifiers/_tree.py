"""Weighted binary CART kernels used by the random forest."""

import math

import numpy as np
from numba import njit

GINI = 0
ENTROPY = 1
LEAF = -1


@njit(cache=True)
def _impurity(w0, w1, criterion):
    total = w0 + w1
    if total <= 0.0:
        return 0.0
    p0 = w0 / total
    p1 = w1 / total
    if criterion == GINI:
        return 1.0 - p0 * p0 - p1 * p1
    h = 0.0
    if p0 > 0.0:
        h -= p0 * math.log2(p0)
    if p1 > 0.0:
        h -= p1 * math.log2(p1)
    return h


@njit(cache=True)
def _children_proxy(lw0, lw1, rw0, rw1, criterion):
    """Monotone stand-in for the weighted child impurity (lower is better)."""
    lw = lw0 + lw1
    rw = rw0 + rw1
    if criterion == GINI:
        return -((lw0 * lw0 + lw1 * lw1) / lw + (rw0 * rw0 + rw1 * rw1) / rw)
    return lw * _impurity(lw0, lw1, criterion) + rw * _impurity(rw0, rw1, criterion)


@njit(cache=True)
def _entropy_proxy(lk0, lk1, rk0, rk1, cw0, cw1, log_cw0, log_cw1, log_k):
    """Sum over children of ``W log W - sum_c w_c log w_c`` (natural log).

    Class weights are ``cw_c * k_c`` with integer bootstrap counts ``k_c``,
    so ``w_c log w_c`` comes from the ``log_k`` table.
    """
    lw0 = cw0 * lk0
    lw1 = cw1 * lk1
    rw0 = cw0 * rk0
    rw1 = cw1 * rk1
    lw = lw0 + lw1
    rw = rw0 + rw1
    out = lw * math.log(lw) + rw * math.log(rw)
    if lk0 > 0:
        out -= lw0 * (log_cw0 + log_k[lk0])
    if lk1 > 0:
        out -= lw1 * (log_cw1 + log_k[lk1])
    if rk0 > 0:
        out -= rw0 * (log_cw0 + log_k[rk0])
    if rk1 > 0:
        out -= rw1 * (log_cw1 + log_k[rk1])
    return out


@njit(cache=True)
def build_tree(Xt, sorted_idx, y, class_weight, max_features, min_samples_leaf, criterion, seed,
               bootstrap):
    """Grow one tree on a bootstrap sample.

    ``Xt`` is feature-major (n_features x n_samples) and ``sorted_idx[f]``
    orders all samples by feature ``f``.  Bootstrap counts are
    folded into the sample weights together with the class weights;
    ``min_samples_leaf`` counts distinct in-bag samples.

    Returns node arrays ``(feature, threshold, left, right, value, impurity,
    n_samples, weight)`` and the tree's unnormalized impurity decreases per
    feature.  ``value`` is the weighted fraction of the positive class.
    """
    np.random.seed(seed)
    p, n = Xt.shape
    counts = np.zeros(n, dtype=np.int64)
    if bootstrap:
        for _ in range(n):
            counts[np.random.randint(0, n)] += 1
    else:
        counts[:] = 1
    n_in = 0
    for i in range(n):
        if counts[i] > 0:
            n_in += 1
    samples = np.empty(n_in, dtype=np.int64)
    weight = np.zeros(n)
    j = 0
    for i in range(n):
        if counts[i] > 0:
            samples[j] = i
            weight[i] = counts[i] * class_weight[y[i]]
            j += 1

    cap = 2 * n_in + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    impurity = np.zeros(cap)
    node_n = np.zeros(cap, dtype=np.int64)
    node_w = np.zeros(cap)
    importance = np.zeros(p)

    feats = np.arange(p)
    vals = np.empty(n_in)
    nw0 = np.empty(n_in)
    nw1 = np.empty(n_in)
    sw0 = np.empty(n_in)
    sw1 = np.empty(n_in)
    sv = np.empty(n_in)
    sk = np.empty(n_in, dtype=np.int64)  # signed bootstrap count: + positive, - negative
    log_k = np.zeros(n + 1)
    for i in range(1, n + 1):
        log_k[i] = math.log(i)
    cw0 = class_weight[0]
    cw1 = class_weight[1]
    log_cw0 = math.log(cw0) if cw0 > 0 else 0.0
    log_cw1 = math.log(cw1) if cw1 > 0 else 0.0
    pos = np.empty(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    order_buf = np.empty(n_in, dtype=np.int64)
    scratch = np.empty(n_in, dtype=np.int64)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n_in
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        m = end - start
        w0 = 0.0
        w1 = 0.0
        k0 = 0
        k1 = 0
        for k in range(start, end):
            s = samples[k]
            if y[s] == 1:
                w1 += weight[s]
                k1 += counts[s]
            else:
                w0 += weight[s]
                k0 += counts[s]
        wn = w0 + w1
        imp = _impurity(w0, w1, criterion)
        value[node] = w1 / wn if wn > 0 else 0.0
        impurity[node] = imp
        node_n[node] = m
        node_w[node] = wn
        if m < 2 * min_samples_leaf or imp <= 0.0:
            continue

        # large nodes walk the presorted order; small ones sort locally
        use_presort = m * math.log2(m) > 0.25 * n
        for k in range(m):
            s = samples[start + k]
            pos[s] = k
            mark[s] = node + 1
            if y[s] == 1:
                nw0[k] = 0.0
                nw1[k] = weight[s]
            else:
                nw0[k] = weight[s]
                nw1[k] = 0.0

        best_proxy = np.inf
        best_f = -1
        best_thr = 0.0
        best_lw0 = 0.0
        best_lw1 = 0.0
        visited = 0
        f_i = 0
        while f_i < p and visited < max_features:
            r = f_i + np.random.randint(0, p - f_i)
            tmp = feats[f_i]
            feats[f_i] = feats[r]
            feats[r] = tmp
            f = feats[f_i]
            f_i += 1
            row = Xt[f]
            if use_presort:
                order_f = sorted_idx[f]
                j = 0
                for q in range(n):
                    s = order_f[q]
                    if mark[s] == node + 1:
                        vals[j] = row[s]
                        sw0[j] = nw0[pos[s]]
                        sw1[j] = nw1[pos[s]]
                        sk[j] = counts[s] if y[s] == 1 else -counts[s]
                        j += 1
            else:
                for k in range(m):
                    vals[k] = row[samples[start + k]]
                order = np.argsort(vals[:m])
                for k in range(m):
                    o = order[k]
                    sv[k] = vals[o]
                    sw0[k] = nw0[o]
                    sw1[k] = nw1[o]
                    s = samples[start + o]
                    sk[k] = counts[s] if y[s] == 1 else -counts[s]
                for k in range(m):
                    vals[k] = sv[k]
            if vals[m - 1] <= vals[0]:
                continue
            visited += 1
            lw0 = 0.0
            lw1 = 0.0
            lk0 = 0
            lk1 = 0
            b = vals[0]
            for k in range(m - 1):
                lw0 += sw0[k]
                lw1 += sw1[k]
                if sk[k] > 0:
                    lk1 += sk[k]
                else:
                    lk0 -= sk[k]
                a = b
                b = vals[k + 1]
                if a >= b:
                    continue
                n_left = k + 1
                if n_left < min_samples_leaf or m - n_left < min_samples_leaf:
                    continue
                if criterion == GINI:
                    proxy = _children_proxy(lw0, lw1, w0 - lw0, w1 - lw1, criterion)
                else:
                    proxy = _entropy_proxy(lk0, lk1, k0 - lk0, k1 - lk1, cw0, cw1, log_cw0,
                                           log_cw1, log_k)
                # near-equal proxies count as ties (first wins), so rounding
                # differences from rescaled class weights cannot flip a choice
                if best_f < 0 or proxy < best_proxy - 1e-12 * (abs(best_proxy) + wn):
                    best_proxy = proxy
                    best_f = f
                    thr = 0.5 * (a + b)
                    if thr >= b:
                        thr = a
                    best_thr = thr
                    best_lw0 = lw0
                    best_lw1 = lw1
        if best_f < 0:
            continue
        rw0 = w0 - best_lw0
        rw1 = w1 - best_lw1
        decrease = (wn * imp - (best_lw0 + best_lw1) * _impurity(best_lw0, best_lw1, criterion)
                    - (rw0 + rw1) * _impurity(rw0, rw1, criterion))
        if decrease <= 1e-12 * wn:
            continue

        # partition samples[start:end] by x <= threshold, keeping relative order
        n_l = 0
        n_r = 0
        for k in range(start, end):
            s = samples[k]
            if Xt[best_f, s] <= best_thr:
                order_buf[n_l] = s
                n_l += 1
            else:
                scratch[n_r] = s
                n_r += 1
        for k in range(n_l):
            samples[start + k] = order_buf[k]
        for k in range(n_r):
            samples[start + n_l + k] = scratch[k]

        feature[node] = best_f
        threshold[node] = best_thr
        importance[best_f] += decrease
        l_id = n_nodes
        r_id = n_nodes + 1
        n_nodes += 2
        left[node] = l_id
        right[node] = r_id
        stack_node[top] = r_id
        stack_start[top] = start + n_l
        stack_end[top] = end
        top += 1
        stack_node[top] = l_id
        stack_start[top] = start
        stack_end[top] = start + n_l
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), impurity[:n_nodes].copy(),
            node_n[:n_nodes].copy(), node_w[:n_nodes].copy(), importance)


@njit(cache=True)
def predict_leaf_values(X, feature, threshold, left, right, value, roots, out):
    """Leaf value of every tree for every row: ``out[row, tree]``."""
    for t in range(roots.shape[0]):
        root = roots[t]
        for i in range(X.shape[0]):
            node = root
            while feature[node] != LEAF:
                if X[i, feature[node]] <= threshold[node]:
                    node = root + left[node]
                else:
                    node = root + right[node]
            out[i, t] = value[node]
