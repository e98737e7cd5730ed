"""Reference thinning by direct history sums.

Works for any kernel and intensity map.  Intensities are recomputed from the
full history at every candidate, which is slow but independent of the
recursions used by the compiled loops.  The candidate scheme and the order
of random draws are those of :mod:`._core`, so on exponential kernels with a
linear map both paths return the same log.
"""

from __future__ import annotations

import numpy as np

from ..intensity import Linear
from .spec import SystemSpec, is_meanfield


class HistoryModel:
    """Intensity and dominating bounds of a system given its jump history."""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.kernel = spec.kernel
        self.n = spec.n_nodes
        self.meanfield = is_meanfield(spec.topology) and spec.impulse is None
        h = spec.intensity
        self.linear = isinstance(h, Linear)
        if self.linear:
            self.base = h.baseline(self.n)
            self.slope = 1.0
        else:
            self.base = h.value_at_zero(self.n)
            self.slope = float(h.lipschitz)
        self.h = h
        self.monotone = bool(self.kernel.monotone)
        self.support = float(self.kernel.support)
        self.env = float(self.kernel.envelope())
        self.in_idx, self.in_w = [], []
        for i in range(self.n):
            j, w = spec.topology.in_neighbours(i)
            self.in_idx.append(j)
            self.in_w.append(w)
        self.kick = np.zeros(self.n)
        if spec.impulse is not None:
            tgt, w = spec.topology.out_neighbours(spec.impulse)
            np.add.at(self.kick, tgt, w)
        self.hist = [[] for _ in range(self.n)]
        self.all_times = []

    def add(self, k, s):
        self.hist[k].append(s)
        self.all_times.append(s)

    def _phi_sum(self, times, s, inclusive):
        if not times:
            return 0.0
        t = np.asarray(times)
        t = t[t <= s] if inclusive else t[t < s]
        return float(np.sum(self.kernel(s - t)))

    def _window_count(self, times, s):
        if not times:
            return 0
        t = np.asarray(times)
        return int(np.count_nonzero((t <= s) & (t >= s - self.support)))

    def excitation(self, k, s, inclusive=False):
        if self.meanfield:
            return self._phi_sum(self.all_times, s, inclusive) / self.n
        x = self.kick[k] * float(self.kernel(s)) if self.kick[k] else 0.0
        for j, w in zip(self.in_idx[k], self.in_w[k]):
            x += w * self._phi_sum(self.hist[j], s, inclusive)
        return x

    def _excitation_bound(self, k, s):
        if self.monotone:
            return self.excitation(k, s, inclusive=True)
        if self.meanfield:
            return self.env * self._window_count(self.all_times, s) / self.n
        x = self.kick[k] * self.env if (self.kick[k] and s <= self.support) else 0.0
        for j, w in zip(self.in_idx[k], self.in_w[k]):
            x += w * self.env * self._window_count(self.hist[j], s)
        return x

    def intensity(self, k, s):
        x = self.excitation(k, s)
        if self.linear:
            return float(self.base[k] + x)
        return float(self.h(x, k))

    def bound(self, k, s):
        return float(self.base[k] + self.slope * self._excitation_bound(k, s))

    def shared_bound(self, s):
        """Excitation part of the bound, common to all nodes (mean-field only)."""
        return self.slope * self._excitation_bound(0, s)


def select_meanfield(base, smu, X, u, n):
    if u < smu:
        cum = np.cumsum(base)
        k = int(np.searchsorted(cum, u, side="right"))
        return _skip_empty(base, min(k, n - 1))
    return min(int((u - smu) / X), n - 1)


def select_csr(M, u):
    cum = np.cumsum(M)
    k = int(np.searchsorted(cum, u, side="right"))
    return _skip_empty(M, min(k, M.size - 1))


def _skip_empty(w, k):
    while k > 0 and w[k] <= 0:
        k -= 1
    return k


def simulate_generic(spec: SystemSpec, gen: np.random.Generator, audit_every: int = 0):
    """Returns ``(nodes, times, n_candidates, n_ties, status, audit_rows)``."""
    model = HistoryModel(spec)
    n, T = model.n, spec.T
    nodes, times, audit = [], [], []
    t, t_last, n_cand, n_ties = 0.0, -1.0, 0, 0
    from ._core import audit_pick  # compiled helper, pure integer hash

    if model.meanfield:
        smu = float(np.sum(model.base))
        X = model.shared_bound(0.0)
    else:
        M = np.array([model.bound(k, 0.0) for k in range(n)])
    while True:
        tot = smu + n * X if model.meanfield else float(np.sum(M))
        if tot <= 0:
            break
        s = t + gen.standard_exponential() / tot
        if s > T:
            break
        t = s
        u = gen.random() * tot
        if model.meanfield:
            k = select_meanfield(model.base, smu, X, u, n)
            Mk = model.base[k] + X
        else:
            k = select_csr(M, u)
            Mk = M[k]
        lam = model.intensity(k, s)
        z = gen.random() * Mk
        acc = z <= lam
        if audit_every and audit_pick(n_cand, audit_every):
            audit.append((k, s, z, Mk, lam, acc))
        n_cand += 1
        if acc:
            if s == t_last:
                n_ties += 1
            t_last = s
            model.add(k, s)
            nodes.append(k)
            times.append(s)
            if len(times) >= spec.cap:
                return nodes, times, n_cand, n_ties, 1, audit
        if model.meanfield:
            X = model.shared_bound(s)
        else:
            M[k] = model.bound(k, s)
            if acc:
                for i in spec.topology.out_neighbours(k)[0]:
                    M[i] = model.bound(i, s)
    return nodes, times, n_cand, n_ties, 0, audit


def simulate_coupled_generic(specA: SystemSpec, specB: SystemSpec, gen: np.random.Generator):
    """Shared-marks coupling of two systems on the same node set."""
    if specA.n_nodes != specB.n_nodes:
        raise ValueError("coupled systems must share their node set")
    T = min(specA.T, specB.T)
    mA, mB = HistoryModel(specA), HistoryModel(specB)
    n = mA.n
    MA = np.array([mA.bound(k, 0.0) for k in range(n)])
    MB = np.array([mB.bound(k, 0.0) for k in range(n)])
    logA, logB = ([], []), ([], [])
    diff = np.zeros(n, dtype=np.int64)
    sup_d = np.zeros(n, dtype=np.int64)
    tv = np.zeros(n, dtype=np.int64)
    t, n_cand = 0.0, 0
    outA = [specA.topology.out_neighbours(k)[0] for k in range(n)]
    outB = [specB.topology.out_neighbours(k)[0] for k in range(n)]
    while True:
        M = np.maximum(MA, MB)
        tot = float(np.sum(M))
        if tot <= 0:
            break
        s = t + gen.standard_exponential() / tot
        if s > T:
            break
        t = s
        k = select_csr(M, gen.random() * tot)
        z = gen.random() * M[k]
        n_cand += 1
        accA = z <= mA.intensity(k, s)
        accB = z <= mB.intensity(k, s)
        for acc, model, log, Mx, out in ((accA, mA, logA, MA, outA), (accB, mB, logB, MB, outB)):
            if acc:
                model.add(k, s)
                log[0].append(k)
                log[1].append(s)
            Mx[k] = model.bound(k, s)
            if acc:
                for i in out[k]:
                    Mx[i] = model.bound(i, s)
        if accA != accB:
            tv[k] += 1
            diff[k] += 1 if accA else -1
            sup_d[k] = max(sup_d[k], abs(diff[k]))
        if len(logA[1]) + len(logB[1]) >= min(specA.cap, specB.cap):
            return logA, logB, tv, sup_d, n_cand, 1, t
    return logA, logB, tv, sup_d, n_cand, 0, t


def lambda_from_log(spec: SystemSpec, nodes, times, k, s) -> float:
    """Intensity of node ``k`` at ``s`` recomputed from a complete log."""
    model = HistoryModel(spec)
    nodes = np.asarray(nodes)
    times = np.asarray(times)
    keep = times < s
    for j, tj in zip(nodes[keep].tolist(), times[keep].tolist()):
        model.add(j, tj)
    return model.intensity(k, s)


__all__ = ["HistoryModel", "lambda_from_log", "simulate_coupled_generic", "simulate_generic"]
