"""Compiled inner loops for tree construction and message passing.

The merge tree degenerates to a single chain on a ramp DEM, so none of these
sweeps can be vectorised across nodes; they run as sequential loops compiled
with numba. Without numba the same code runs as plain Python (correct, just
slow on large scenes).

Message passing conventions (sum-product): per node, the leafward sweep
stores the log of the normalised upward message (lnu0, lnu1) and the rootward
sweep the log of the normalised downward message (ldl0, ldl1). Every
normalisation constant from the leafward sweep accumulates into the
log-likelihood, which keeps it exact for arbitrarily long chains. The dry
component of every message stays finite by construction (the transition row
for a dry child is bounded below by 1 - rho > 0), so no normalisation can hit
an empty support.
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def _find(uf, x):
    root = x
    while uf[root] != root:
        root = uf[root]
    while uf[x] != root:
        nxt = uf[x]
        uf[x] = root
        x = nxt
    return root


@njit(cache=True)
def merge_tree_kernel(order, node_of, nrows, ncols, drs, dcs):
    """Union-find merge sweep over pixels in ascending visit order.

    order: flat pixel index of node i; node_of: flat pixel -> node id or -1.
    Returns CSR parents (ptr, idx), each node's parent list sorted ascending,
    and the unique child of every node (-1 at chain tops).
    """
    n = order.shape[0]
    uf = np.empty(n, dtype=np.int64)
    rep = np.empty(n, dtype=np.int64)
    parent_ptr = np.empty(n + 1, dtype=np.int64)
    parent_idx = np.empty(max(n - 1, 1), dtype=np.int64)
    child = np.full(n, -1, dtype=np.int64)
    nnb = drs.shape[0]
    roots = np.empty(nnb, dtype=np.int64)
    pars = np.empty(nnb, dtype=np.int64)
    parent_ptr[0] = 0
    e = 0
    for i in range(n):
        p = order[i]
        r = p // ncols
        c = p % ncols
        uf[i] = i
        rep[i] = i
        k = 0
        for t in range(nnb):
            rr = r + drs[t]
            cc = c + dcs[t]
            if rr < 0 or rr >= nrows or cc < 0 or cc >= ncols:
                continue
            j = node_of[rr * ncols + cc]
            if j < 0 or j >= i:
                continue
            root = _find(uf, j)
            dup = False
            for s in range(k):
                if roots[s] == root:
                    dup = True
                    break
            if not dup:
                roots[k] = root
                pars[k] = rep[root]
                k += 1
        for a in range(1, k):
            key_p = pars[a]
            key_r = roots[a]
            b = a - 1
            while b >= 0 and pars[b] > key_p:
                pars[b + 1] = pars[b]
                roots[b + 1] = roots[b]
                b -= 1
            pars[b + 1] = key_p
            roots[b + 1] = key_r
        for s in range(k):
            parent_idx[e] = pars[s]
            e += 1
            child[pars[s]] = i
            uf[roots[s]] = i
        parent_ptr[i + 1] = e
    return parent_ptr, parent_idx[:e].copy(), child


@njit(cache=True)
def sum_product_kernel(parent_ptr, parent_idx, child, ev0, ev1, pi, rho):
    """Exact marginals, pairwise class/parent-AND stats, and log-likelihood."""
    n = child.shape[0]
    neg_inf = -np.inf
    lnu0 = np.empty(n)
    lnu1 = np.empty(n)
    logq = np.zeros(n)
    log_pi = math.log(pi)
    log_1mpi = math.log1p(-pi)
    log_rho = math.log(rho)
    log_1mrho = math.log1p(-rho)
    loglik = 0.0

    maxdeg = 0
    for i in range(n):
        d = parent_ptr[i + 1] - parent_ptr[i]
        if d > maxdeg:
            maxdeg = d
    pre = np.empty(maxdeg + 1)
    suf = np.empty(maxdeg + 1)

    for i in range(n):
        a = parent_ptr[i]
        b = parent_ptr[i + 1]
        if a == b:
            lu0 = ev0[i] + log_1mpi
            lu1 = ev1[i] + log_pi
        else:
            lq = 0.0
            for t in range(a, b):
                lq += lnu1[parent_idx[t]]
            logq[i] = lq
            q = math.exp(lq)
            lu0 = ev0[i] + math.log1p(-rho * q)
            lu1 = ev1[i] + log_rho + lq
        m = lu0 if lu0 >= lu1 else lu1
        z = math.exp(lu0 - m) + math.exp(lu1 - m)
        lz = m + math.log(z)
        lnu0[i] = lu0 - lz
        lnu1[i] = lu1 - lz
        loglik += lz

    ldl0 = np.zeros(n)
    ldl1 = np.zeros(n)
    gamma = np.empty(n)
    t00 = np.full(n, np.nan)
    t01 = np.full(n, np.nan)
    t11 = np.full(n, np.nan)

    for i in range(n - 1, -1, -1):
        b0 = lnu0[i] + ldl0[i]
        b1 = lnu1[i] + ldl1[i]
        m = b0 if b0 >= b1 else b1
        g0 = math.exp(b0 - m)
        g1 = math.exp(b1 - m)
        gamma[i] = g1 / (g0 + g1)
        a = parent_ptr[i]
        b = parent_ptr[i + 1]
        if a == b:
            continue
        lb0 = ev0[i] + ldl0[i]
        lb1 = ev1[i] + ldl1[i]
        lq = logq[i]
        q = math.exp(lq)
        s00 = lb0 + (math.log1p(-q) if q < 1.0 else neg_inf)
        s01 = lb0 + log_1mrho + lq
        s11 = lb1 + log_rho + lq
        mm = s00
        if s01 > mm:
            mm = s01
        if s11 > mm:
            mm = s11
        e00 = math.exp(s00 - mm)
        e01 = math.exp(s01 - mm)
        e11 = math.exp(s11 - mm)
        zt = e00 + e01 + e11
        t00[i] = e00 / zt
        t01[i] = e01 / zt
        t11[i] = e11 / zt

        deg = b - a
        pre[0] = 0.0
        for t in range(deg):
            pre[t + 1] = pre[t] + lnu1[parent_idx[a + t]]
        suf[deg] = 0.0
        for t in range(deg - 1, -1, -1):
            suf[t] = suf[t + 1] + lnu1[parent_idx[a + t]]
        for t in range(deg):
            k = parent_idx[a + t]
            lqex = pre[t] + suf[t + 1]
            qex = math.exp(lqex)
            term_a = lb0 + math.log1p(-rho * qex)
            term_b = lb1 + log_rho + lqex
            if term_b == neg_inf:
                lm1 = term_a
            elif term_b > term_a:
                lm1 = term_b + math.log1p(math.exp(term_a - term_b))
            else:
                lm1 = term_a + math.log1p(math.exp(term_b - term_a))
            lm0 = lb0
            mm2 = lm0 if lm0 >= lm1 else lm1
            zz = math.exp(lm0 - mm2) + math.exp(lm1 - mm2)
            lzz = mm2 + math.log(zz)
            ldl0[k] = lm0 - lzz
            ldl1[k] = lm1 - lzz

    return gamma, t00, t01, t11, loglik


@njit(cache=True)
def max_sum_kernel(parent_ptr, parent_idx, child, ev0, ev1, pi, rho):
    """Jointly most probable labelling; ties resolved toward dry."""
    n = child.shape[0]
    M0 = np.empty(n)
    M1 = np.empty(n)
    log_pi = math.log(pi)
    log_1mpi = math.log1p(-pi)
    log_rho = math.log(rho)
    log_1mrho = math.log1p(-rho)

    for i in range(n):
        a = parent_ptr[i]
        b = parent_ptr[i + 1]
        if a == b:
            m0 = ev0[i] + log_1mpi
            m1 = ev1[i] + log_pi
        else:
            s1 = 0.0
            smax = 0.0
            anydry = False
            mingap = np.inf
            for t in range(a, b):
                k = parent_idx[t]
                s1 += M1[k]
                if M0[k] >= M1[k]:
                    anydry = True
                    smax += M0[k]
                else:
                    smax += M1[k]
                    gap = M1[k] - M0[k]
                    if gap < mingap:
                        mingap = gap
            best_a0 = smax if anydry else smax - mingap
            allflood = log_1mrho + s1
            m0 = ev0[i] + (best_a0 if best_a0 >= allflood else allflood)
            m1 = ev1[i] + log_rho + s1
        norm = m0 if m0 >= m1 else m1
        M0[i] = m0 - norm
        M1[i] = m1 - norm

    labels = np.zeros(n, dtype=np.int8)
    for i in range(n - 1, -1, -1):
        if child[i] < 0:
            labels[i] = 1 if M1[i] > M0[i] else 0
        a = parent_ptr[i]
        b = parent_ptr[i + 1]
        if a == b:
            continue
        if labels[i] == 1:
            for t in range(a, b):
                labels[parent_idx[t]] = 1
            continue
        # dry child: replay the comparison made on the leafward sweep
        s1 = 0.0
        smax = 0.0
        anydry = False
        mingap = np.inf
        argmin = -1
        for t in range(a, b):
            k = parent_idx[t]
            s1 += M1[k]
            if M0[k] >= M1[k]:
                anydry = True
                smax += M0[k]
            else:
                smax += M1[k]
                gap = M1[k] - M0[k]
                if gap < mingap:
                    mingap = gap
                    argmin = t
        best_a0 = smax if anydry else smax - mingap
        allflood = log_1mrho + s1
        if best_a0 >= allflood:
            for t in range(a, b):
                k = parent_idx[t]
                labels[k] = 1 if M1[k] > M0[k] else 0
            if not anydry:
                labels[parent_idx[argmin]] = 0
        else:
            for t in range(a, b):
                labels[parent_idx[t]] = 1
    return labels


@njit(cache=True)
def count_order_violations(parent_ptr, parent_idx, labels):
    """Flood nodes with at least one dry parent."""
    v = 0
    for i in range(parent_ptr.shape[0] - 1):
        if labels[i] != 1:
            continue
        for t in range(parent_ptr[i], parent_ptr[i + 1]):
            if labels[parent_idx[t]] == 0:
                v += 1
                break
    return v


def warm_up():
    """Trigger JIT compilation of all kernels on a two-node chain."""
    ptr = np.array([0, 0, 1], dtype=np.int64)
    idx = np.array([0], dtype=np.int64)
    child = np.array([1, -1], dtype=np.int64)
    ev = np.zeros(2)
    sum_product_kernel(ptr, idx, child, ev, ev, 0.5, 0.9)
    max_sum_kernel(ptr, idx, child, ev, ev, 0.5, 0.9)
    count_order_violations(ptr, idx, np.zeros(2, dtype=np.int8))
    order = np.array([0, 1], dtype=np.int64)
    node_of = np.array([0, 1], dtype=np.int64)
    merge_tree_kernel(order, node_of, 1, 2, np.array([0], dtype=np.int64), np.array([-1], dtype=np.int64))
