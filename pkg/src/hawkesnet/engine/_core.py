"""Compiled thinning loops for exponential kernels with linear intensity.

All loops share one candidate scheme.  With ``M_k`` the current bound of
node ``k`` and ``S = sum_k M_k``:

1. ``s = t + E / S`` with ``E ~ Exp(1)``;
2. node ``k`` chosen with probability ``M_k / S`` from ``U * S``;
3. mark ``z = U' * M_k``; accepted iff ``z <= lambda_k(s)``.

The bound of every node touched by a candidate is reset to its intensity at
``s+``, which dominates the intensity until the next event since it only
decays.  The generic history-sum path draws the same numbers in the same
order.
"""

import math

import numpy as np
from numba import njit

OK = 0
EXPLODED = 1

_AUDIT_MUL = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, nogil=True)
def audit_pick(c, every):
    # deterministic subset of candidate indices, no random draws involved
    h = np.uint64(c) * _AUDIT_MUL
    h ^= h >> np.uint64(29)
    return (h % np.uint64(every)) == np.uint64(0)


@njit(cache=True, nogil=True)
def tree_build(vals):
    n = vals.size
    p = 1
    while p < n:
        p *= 2
    tree = np.zeros(2 * p)
    tree[p:p + n] = vals
    for j in range(p - 1, 0, -1):
        tree[j] = tree[2 * j] + tree[2 * j + 1]
    return tree


@njit(cache=True, nogil=True)
def tree_set(tree, i, v):
    p = tree.size // 2
    j = p + i
    tree[j] = v
    j //= 2
    while j >= 1:
        tree[j] = tree[2 * j] + tree[2 * j + 1]
        j //= 2


@njit(cache=True, nogil=True)
def tree_find(tree, u, n):
    p = tree.size // 2
    j = 1
    while j < p:
        left = tree[2 * j]
        if u < left:
            j = 2 * j
        else:
            u -= left
            j = 2 * j + 1
    k = j - p
    # rounding can land on an empty leaf at the right edge
    if k >= n or tree[p + k] <= 0.0:
        k = min(k, n - 1)
        while k > 0 and tree[p + k] <= 0.0:
            k -= 1
    return k


@njit(cache=True, nogil=True)
def _grow_i(a):
    out = np.empty(2 * a.size, dtype=a.dtype)
    out[:a.size] = a
    return out


@njit(cache=True, nogil=True)
def _grow_f(a):
    out = np.empty(2 * a.size)
    out[:a.size] = a
    return out


@njit(cache=True, nogil=True)
def csr_exp(mu, indptr, idx, w, a, b, T, E0, gen, cap, record, snaps, audit_every):
    """CSR topology.  ``E0`` holds the excitation at time 0 (impulse kick)."""
    n = mu.size
    E = E0.copy()
    tl = np.zeros(n)
    M = mu + E
    tree = tree_build(M)
    counts = np.zeros(n, dtype=np.int64)
    ns = snaps.size
    snap_counts = np.zeros((ns, n), dtype=np.int64)
    si = 0
    cap_ev = 1024 if record else 1
    ev_node = np.empty(cap_ev, dtype=np.int64)
    ev_time = np.empty(cap_ev)
    na = 0
    au_node = np.empty(16, dtype=np.int64)
    au_f = np.empty((16, 4))
    au_acc = np.empty(16, dtype=np.bool_)
    n_au = 0
    t = 0.0
    t_last = -1.0
    n_ev = 0
    n_cand = 0
    n_ties = 0
    status = OK
    while True:
        tot = tree[1]
        if tot <= 0.0:
            break
        s = t + gen.standard_exponential() / tot
        while si < ns and s > snaps[si]:
            snap_counts[si, :] = counts
            si += 1
        if s > T:
            break
        t = s
        k = tree_find(tree, gen.random() * tot, n)
        Mk = M[k]
        Ek = E[k] * math.exp(-b * (s - tl[k]))
        lam = mu[k] + Ek
        z = gen.random() * Mk
        acc = z <= lam
        if audit_every > 0 and audit_pick(n_cand, audit_every):
            if n_au == au_node.size:
                au_node = _grow_i(au_node)
                nf = np.empty((2 * n_au, 4))
                nf[:n_au] = au_f
                au_f = nf
                nb = np.empty(2 * n_au, dtype=np.bool_)
                nb[:n_au] = au_acc
                au_acc = nb
            au_node[n_au] = k
            au_f[n_au, 0] = s
            au_f[n_au, 1] = z
            au_f[n_au, 2] = Mk
            au_f[n_au, 3] = lam
            au_acc[n_au] = acc
            n_au += 1
        n_cand += 1
        E[k] = Ek
        tl[k] = s
        M[k] = lam
        tree_set(tree, k, lam)
        if acc:
            if s == t_last:
                n_ties += 1
            t_last = s
            counts[k] += 1
            if record:
                if n_ev == ev_node.size:
                    ev_node = _grow_i(ev_node)
                    ev_time = _grow_f(ev_time)
                ev_node[n_ev] = k
                ev_time[n_ev] = s
            n_ev += 1
            for q in range(indptr[k], indptr[k + 1]):
                i = idx[q]
                E[i] = E[i] * math.exp(-b * (s - tl[i])) + a * w[q]
                tl[i] = s
                M[i] = mu[i] + E[i]
                tree_set(tree, i, M[i])
            if n_ev >= cap:
                status = EXPLODED
                break
    if status == OK:
        while si < ns:
            snap_counts[si, :] = counts
            si += 1
    na = n_ev if record else 0
    return (status, t, n_ev, n_cand, n_ties, counts, snap_counts, ev_node[:na], ev_time[:na],
            au_node[:n_au], au_f[:n_au], au_acc[:n_au])


@njit(cache=True, nogil=True)
def meanfield_exp(mu, a, b, T, gen, cap, record, snaps, audit_every):
    """Complete graph with weight ``1/N``: one shared excitation ``G``.

    ``M_k = mu_k + G`` so ``S = sum(mu) + N G``; a node is drawn from the
    baseline part (proportional to ``mu``) or uniformly from the shared part.
    """
    n = mu.size
    wN = a / n
    mtree = tree_build(mu)
    smu = mtree[1]
    G = 0.0
    tg = 0.0
    counts = np.zeros(n, dtype=np.int64)
    ns = snaps.size
    snap_counts = np.zeros((ns, n), dtype=np.int64)
    si = 0
    cap_ev = 1024 if record else 1
    ev_node = np.empty(cap_ev, dtype=np.int64)
    ev_time = np.empty(cap_ev)
    au_node = np.empty(16, dtype=np.int64)
    au_f = np.empty((16, 4))
    au_acc = np.empty(16, dtype=np.bool_)
    n_au = 0
    t = 0.0
    t_last = -1.0
    n_ev = 0
    n_cand = 0
    n_ties = 0
    status = OK
    while True:
        tot = smu + n * G
        if tot <= 0.0:
            break
        s = t + gen.standard_exponential() / tot
        while si < ns and s > snaps[si]:
            snap_counts[si, :] = counts
            si += 1
        if s > T:
            break
        t = s
        u = gen.random() * tot
        if u < smu:
            k = tree_find(mtree, u, n)
        else:
            k = min(int((u - smu) / G), n - 1)
        Mk = mu[k] + G
        Gs = G * math.exp(-b * (s - tg))
        lam = mu[k] + Gs
        z = gen.random() * Mk
        acc = z <= lam
        if audit_every > 0 and audit_pick(n_cand, audit_every):
            if n_au == au_node.size:
                au_node = _grow_i(au_node)
                nf = np.empty((2 * n_au, 4))
                nf[:n_au] = au_f
                au_f = nf
                nb = np.empty(2 * n_au, dtype=np.bool_)
                nb[:n_au] = au_acc
                au_acc = nb
            au_node[n_au] = k
            au_f[n_au, 0] = s
            au_f[n_au, 1] = z
            au_f[n_au, 2] = Mk
            au_f[n_au, 3] = lam
            au_acc[n_au] = acc
            n_au += 1
        n_cand += 1
        G = Gs
        tg = s
        if acc:
            if s == t_last:
                n_ties += 1
            t_last = s
            G += wN
            counts[k] += 1
            if record:
                if n_ev == ev_node.size:
                    ev_node = _grow_i(ev_node)
                    ev_time = _grow_f(ev_time)
                ev_node[n_ev] = k
                ev_time[n_ev] = s
            n_ev += 1
            if n_ev >= cap:
                status = EXPLODED
                break
    if status == OK:
        while si < ns:
            snap_counts[si, :] = counts
            si += 1
    na = n_ev if record else 0
    return (status, t, n_ev, n_cand, n_ties, counts, snap_counts, ev_node[:na], ev_time[:na],
            au_node[:n_au], au_f[:n_au], au_acc[:n_au])


@njit(cache=True, nogil=True)
def grid_max(values, t0, dt, lo, hi):
    """Max of the piecewise-linear interpolant of ``values`` over ``[lo, hi]``."""
    n = values.size
    best = interp(values, t0, dt, lo)
    v = interp(values, t0, dt, hi)
    if v > best:
        best = v
    j0 = int(math.ceil((lo - t0) / dt))
    j1 = int(math.floor((hi - t0) / dt))
    if j0 < 0:
        j0 = 0
    if j1 > n - 1:
        j1 = n - 1
    for j in range(j0, j1 + 1):
        if values[j] > best:
            best = values[j]
    return best


@njit(cache=True, nogil=True)
def interp(values, t0, dt, t):
    x = (t - t0) / dt
    if x <= 0.0:
        return values[0]
    j = int(x)
    if j >= values.size - 1:
        return values[values.size - 1]
    f = x - j
    return values[j] * (1.0 - f) + values[j + 1] * f


@njit(cache=True, nogil=True)
def chaos_exp(n, mu, a, b, T, mvals, mt0, mdt, epoch, gen, cap, record):
    """Mean-field system ``A`` coupled through shared marks to ``n`` independent
    Poisson processes ``B`` with deterministic intensity ``m'`` (grid values).

    Every node shares the bound ``max(mu + G, sup m' on the epoch)`` so nodes
    are drawn uniformly.  For each node the running difference
    ``D = Z^A - Z^B`` is tracked with its running sup and the total variation
    count (candidates accepted by exactly one side).
    """
    wN = a / n
    G = 0.0
    tg = 0.0
    cA = np.zeros(n, dtype=np.int64)
    cB = np.zeros(n, dtype=np.int64)
    sup_d = np.zeros(n, dtype=np.int64)
    tv = np.zeros(n, dtype=np.int64)
    cap_ev = 1024 if record else 1
    evA_node = np.empty(cap_ev, dtype=np.int64)
    evA_time = np.empty(cap_ev)
    evB_node = np.empty(cap_ev, dtype=np.int64)
    evB_time = np.empty(cap_ev)
    nA = 0
    nB = 0
    t = 0.0
    e_end = min(epoch, T)
    mb = grid_max(mvals, mt0, mdt, 0.0, e_end)
    n_cand = 0
    status = OK
    while True:
        bound = mu + G
        if mb > bound:
            bound = mb
        tot = n * bound
        if tot <= 0.0:
            if e_end >= T:
                break
            t = e_end
            e_end = min(e_end + epoch, T)
            mb = grid_max(mvals, mt0, mdt, t, e_end)
            continue
        s = t + gen.standard_exponential() / tot
        if s > e_end:
            if e_end >= T:
                break
            # memoryless restart at the epoch with fresh bounds
            G = G * math.exp(-b * (e_end - tg))
            tg = e_end
            t = e_end
            e_end = min(e_end + epoch, T)
            mb = grid_max(mvals, mt0, mdt, t, e_end)
            continue
        t = s
        k = min(int(gen.random() * n), n - 1)
        z = gen.random() * bound
        n_cand += 1
        G = G * math.exp(-b * (s - tg))
        tg = s
        accA = z <= mu + G
        accB = z <= interp(mvals, mt0, mdt, s)
        if accA:
            G += wN
            cA[k] += 1
            if record:
                if nA == evA_node.size:
                    evA_node = _grow_i(evA_node)
                    evA_time = _grow_f(evA_time)
                evA_node[nA] = k
                evA_time[nA] = s
            nA += 1
        if accB:
            cB[k] += 1
            if record:
                if nB == evB_node.size:
                    evB_node = _grow_i(evB_node)
                    evB_time = _grow_f(evB_time)
                evB_node[nB] = k
                evB_time[nB] = s
            nB += 1
        if accA != accB:
            tv[k] += 1
            d = abs(cA[k] - cB[k])
            if d > sup_d[k]:
                sup_d[k] = d
        if nA + nB >= cap:
            status = EXPLODED
            break
    ra = nA if record else 0
    rb = nB if record else 0
    return (status, t, n_cand, cA, cB, sup_d, tv, evA_node[:ra], evA_time[:ra],
            evB_node[:rb], evB_time[:rb])


@njit(cache=True, nogil=True)
def poisson_grid(n, mvals, mt0, mdt, T, epoch, gen, snaps, record):
    """``n`` independent Poisson processes with intensity ``m'`` by thinning
    against per-epoch maxima; counts at ``snaps`` and optionally the events."""
    ns = snaps.size
    out = np.zeros((ns, n), dtype=np.int64)
    cap_ev = 1024 if record else 1
    ev_node = np.empty(cap_ev, dtype=np.int64)
    ev_time = np.empty(cap_ev)
    n_ev = 0
    n_cand = 0
    for k in range(n):
        t = 0.0
        e_end = min(epoch, T)
        mb = grid_max(mvals, mt0, mdt, 0.0, e_end)
        c = 0
        si = 0
        while True:
            if mb <= 0.0:
                s = math.inf
            else:
                s = t + gen.standard_exponential() / mb
            if s > e_end:
                if e_end >= T:
                    break
                t = e_end
                e_end = min(e_end + epoch, T)
                mb = grid_max(mvals, mt0, mdt, t, e_end)
                continue
            while si < ns and s > snaps[si]:
                out[si, k] = c
                si += 1
            t = s
            n_cand += 1
            if gen.random() * mb <= interp(mvals, mt0, mdt, s):
                c += 1
                if record:
                    if n_ev == ev_node.size:
                        ev_node = _grow_i(ev_node)
                        ev_time = _grow_f(ev_time)
                    ev_node[n_ev] = k
                    ev_time[n_ev] = s
                n_ev += 1
        while si < ns:
            out[si, k] = c
            si += 1
    r = n_ev if record else 0
    return out, n_cand, ev_node[:r], ev_time[:r]


@njit(cache=True, nogil=True)
def weighted_exp_compensator(a, b, ev_t, ev_w, q):
    """``sum_{e: t_e < q} w_e * (a/b) (1 - exp(-b (q - t_e)))`` for sorted ``ev_t`` and ``q``."""
    out = np.empty(q.size)
    W = 0.0
    S = 0.0
    tS = 0.0
    e = 0
    for j in range(q.size):
        while e < ev_t.size and ev_t[e] < q[j]:
            S = S * math.exp(-b * (ev_t[e] - tS)) + ev_w[e]
            tS = ev_t[e]
            W += ev_w[e]
            e += 1
        out[j] = (a / b) * (W - S * math.exp(-b * (q[j] - tS)))
    return out
