"""Independent reference implementations used as test oracles.

Everything here is written as plainly as possible (explicit loops, exact
fractions where ties matter) and shares no code with the package.
"""

import math
from fractions import Fraction

import numpy as np


def naive_confusion(scores, labels, threshold):
    tp = fp = fn = tn = 0
    for s, y in zip(scores, labels):
        pred = s >= threshold
        if pred and y:
            tp += 1
        elif pred and not y:
            fp += 1
        elif not pred and y:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def brute_roc_auc(scores, labels):
    """Trapezoid over the (FPR, TPR) points of every distinct threshold."""
    n_pos = sum(1 for y in labels if y)
    n_neg = len(labels) - n_pos
    points = [(0.0, 0.0)]
    for t in sorted(set(scores), reverse=True):
        tp, fp, _, _ = naive_confusion(scores, labels, t)
        points.append((fp / n_neg, tp / n_pos))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def mann_whitney_auc(scores, labels):
    """U / (n_pos * n_neg) counting ties as one half."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    u = 0.0
    for p in pos:
        for n in neg:
            u += 1.0 if p > n else 0.5 if p == n else 0.0
    return u / (len(pos) * len(neg))


def brute_pr_auc(scores, labels):
    """Sum of (recall step) x precision over thresholds, highest first."""
    n_pos = sum(1 for y in labels if y)
    area, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        tp, fp, _, _ = naive_confusion(scores, labels, t)
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def exact_f2(tp, fp, fn):
    if tp == 0:
        return Fraction(0)
    p = Fraction(tp, tp + fp)
    r = Fraction(tp, tp + fn)
    return 5 * p * r / (4 * p + r)


def brute_f2_max(scores, labels):
    """(threshold, value) over distinct scores plus 0 and 1; ties go to the smallest threshold."""
    best_t, best = None, Fraction(-1)
    for t in sorted(set(scores) | {0.0, 1.0}):
        tp, fp, fn, _ = naive_confusion(scores, labels, t)
        f = exact_f2(tp, fp, fn)
        if f > best:
            best_t, best = t, f
    return best_t, float(best)


def naive_kappa(a, b):
    n = len(a)
    n11 = sum(1 for x, y in zip(a, b) if x and y)
    n00 = sum(1 for x, y in zip(a, b) if not x and not y)
    pa = Fraction(sum(1 for x in a if x), n)
    pb = Fraction(sum(1 for y in b if y), n)
    p_o = Fraction(n11 + n00, n)
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e == 1:
        return 1.0
    return float((p_o - p_e) / (1 - p_e))


def random_instance(rng, n_max=50, tie_free=False):
    """Scores in [0, 1] (coarse grid unless ``tie_free``) with both classes present."""
    n = int(rng.integers(2, n_max + 1))
    labels = np.zeros(n, dtype=int)
    n_pos = int(rng.integers(1, n))
    labels[rng.choice(n, n_pos, replace=False)] = 1
    if tie_free:
        scores = rng.permutation(n) / n + rng.random() * 1e-3
    else:
        scores = np.round(rng.random(n), int(rng.integers(1, 4)))
    return [float(s) for s in scores], [int(y) for y in labels]


# ---------------------------------------------------------------------------
# dense SVM dual solved by accelerated projected gradient


def _project(v, y, lo, hi, iters=64):
    """Euclidean projection onto {lo <= a <= hi, y . a = 0} by bisection on the multiplier."""
    def residual(mu):
        return float(y @ np.clip(v - mu * y, lo, hi))

    a, b = -1.0, 1.0
    while residual(a) < 0:
        a *= 2
    while residual(b) > 0:
        b *= 2
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if residual(mid) > 0:
            a = mid
        else:
            b = mid
    return np.clip(v - 0.5 * (a + b) * y, lo, hi)


def svm_dual_fista(K, y, C, iters=20000):
    """Minimize 0.5 a'Qa - 1'a subject to 0 <= a <= C, y'a = 0, with Q = (y y') * K."""
    Q = (y[:, None] * y[None, :]) * K
    step = 1.0 / np.linalg.eigvalsh(Q).max()
    a = np.zeros(len(y))
    z, t = a.copy(), 1.0
    for _ in range(iters):
        a_next = _project(z - step * (Q @ z - 1.0), y, 0.0, C)
        t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = a_next + (t - 1) / t_next * (a_next - a)
        a, t = a_next, t_next
    return a, float(0.5 * a @ Q @ a - a.sum())


def rbf(A, B, gamma):
    out = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = np.exp(-gamma * np.sum((a - b) ** 2))
    return out


def kkt_violation(alpha, y, K, C, bias):
    """Largest violation of the soft-margin KKT conditions."""
    f = (alpha * y) @ K + bias
    margin = y * f
    worst = 0.0
    for a, m, c in zip(alpha, margin, np.broadcast_to(C, alpha.shape)):
        if a <= 1e-8 * c:
            worst = max(worst, 1.0 - m)
        elif a >= c * (1 - 1e-8):
            worst = max(worst, m - 1.0)
        else:
            worst = max(worst, abs(m - 1.0))
    return worst


def greedy_match_cosines(estimated, planted):
    """Cosine of each planted row with its greedily matched estimated row."""
    def unit(m):
        return m / np.linalg.norm(m, axis=1, keepdims=True)

    sims = unit(planted) @ unit(estimated).T
    pairs = sorted(((sims[i, j], i, j) for i in range(sims.shape[0])
                    for j in range(sims.shape[1])), reverse=True)
    used_i, used_j, out = set(), set(), {}
    for s, i, j in pairs:
        if i not in used_i and j not in used_j:
            out[i] = s
            used_i.add(i)
            used_j.add(j)
    return [out[i] for i in range(sims.shape[0])]


def aligned_phi(model_phi, vocab, terms):
    """Estimated topic-term rows over ``terms``; terms missing from ``vocab`` get zero mass."""
    out = np.zeros((model_phi.shape[0], len(terms)))
    for j, t in enumerate(terms):
        if t in vocab:
            out[:, j] = model_phi[:, vocab.index[t]]
    return out


def planted_two_topic_corpus(seed, n_docs=500, words_per_topic=30, doc_len=(40, 80)):
    """Each document draws from exactly one of two disjoint vocabularies.

    Returns ``(token_docs, true_phi, terms)`` where ``true_phi`` rows are
    the two planted topic-term distributions over ``terms``.
    """
    rng = np.random.default_rng(seed)
    terms = [f"a{i:02d}" for i in range(words_per_topic)] + \
            [f"b{i:02d}" for i in range(words_per_topic)]
    true_phi = np.zeros((2, 2 * words_per_topic))
    for k in range(2):
        w = rng.dirichlet(np.full(words_per_topic, 1.0))
        true_phi[k, k * words_per_topic:(k + 1) * words_per_topic] = w
    docs = []
    for _ in range(n_docs):
        k = int(rng.integers(2))
        n = int(rng.integers(*doc_len))
        ids = rng.choice(2 * words_per_topic, size=n, p=true_phi[k])
        docs.append([terms[i] for i in ids])
    return docs, true_phi, terms


def planted_k_topic_corpus(seed, k=4, n_docs=300, words_per_topic=25, doc_len=(60, 100),
                           mix=0.9, background=0.3, background_vocab=400):
    """Documents dominated (weight ``mix``) by one of ``k`` disjoint-vocabulary topics.

    A fraction ``background`` of tokens is drawn uniformly from a separate
    vocabulary shared by all documents.
    """
    rng = np.random.default_rng(seed)
    V = k * words_per_topic
    terms = [f"t{j}w{i:02d}" for j in range(k) for i in range(words_per_topic)]
    noise_terms = [f"n{i:03d}" for i in range(background_vocab)]
    phi = np.zeros((k, V))
    for j in range(k):
        phi[j, j * words_per_topic:(j + 1) * words_per_topic] = rng.dirichlet(
            np.full(words_per_topic, 1.0))
    docs = []
    for _ in range(n_docs):
        main = int(rng.integers(k))
        theta = np.full(k, (1 - mix) / (k - 1))
        theta[main] = mix
        doc = []
        for _ in range(int(rng.integers(*doc_len))):
            if rng.random() < background:
                doc.append(noise_terms[rng.integers(background_vocab)])
            else:
                t = rng.choice(k, p=theta)
                doc.append(terms[rng.choice(V, p=phi[t])])
        docs.append(doc)
    return docs, phi, terms


def direct_conditional(words, docs, z, i, V, K, alpha, beta):
    """p(z_i = k | z_-i, w) from counts rebuilt from scratch without token i."""
    n_wk = [[0] * K for _ in range(V)]
    n_dk = [[0] * K for _ in range(max(docs) + 1)]
    n_k = [0] * K
    for j, (w, d, k) in enumerate(zip(words, docs, z)):
        if j == i:
            continue
        n_wk[w][k] += 1
        n_dk[d][k] += 1
        n_k[k] += 1
    w, d = words[i], docs[i]
    p = [(n_dk[d][k] + alpha) * (n_wk[w][k] + beta) / (n_k[k] + V * beta) for k in range(K)]
    s = sum(p)
    return [x / s for x in p]


def joint_conditional(words, docs, z, i, V, K, alpha, beta):
    """Same conditional from ratios of the collapsed joint p(w, z)."""
    def log_joint(zz):
        D = max(docs) + 1
        lj = 0.0
        for k in range(K):
            counts = [sum(1 for w, kk in zip(words, zz) if kk == k and w == v) for v in range(V)]
            lj += math.lgamma(V * beta) - V * math.lgamma(beta)
            lj += sum(math.lgamma(c + beta) for c in counts) - math.lgamma(sum(counts) + V * beta)
        for d in range(D):
            counts = [sum(1 for dd, kk in zip(docs, zz) if dd == d and kk == k) for k in range(K)]
            lj += math.lgamma(K * alpha) - K * math.lgamma(alpha)
            lj += sum(math.lgamma(c + alpha) for c in counts) - math.lgamma(sum(counts) + K * alpha)
        return lj

    logs = []
    for k in range(K):
        zz = list(z)
        zz[i] = k
        logs.append(log_joint(zz))
    m = max(logs)
    p = [math.exp(v - m) for v in logs]
    s = sum(p)
    return [x / s for x in p]
