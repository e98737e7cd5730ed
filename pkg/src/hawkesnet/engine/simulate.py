"""Public simulation entry points."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .. import kernels as K
from ..exceptions import ExplosionError, TieWarning
from ..intensity import Linear
from ..rng import generator
from . import _core
from .generic import HistoryModel, simulate_coupled_generic, simulate_generic
from .spec import AuditRecords, CountSnapshots, EventLog, SystemSpec, is_meanfield

AUDIT_EVERY = 100


def _arrays(spec: SystemSpec):
    mu = np.ascontiguousarray(spec.baseline(), dtype=float)
    indptr, idx, w = spec.topology.out_csr
    E0 = np.zeros(spec.n_nodes)
    if spec.impulse is not None:
        tgt, wt = spec.topology.out_neighbours(spec.impulse)
        np.add.at(E0, tgt, spec.kernel.a * wt)
    return mu, indptr, idx, w, E0


def _run_fast(spec, gen, record, snaps, audit_every):
    k = spec.kernel
    if is_meanfield(spec.topology) and spec.impulse is None:
        return _core.meanfield_exp(np.ascontiguousarray(spec.baseline(), dtype=float), float(k.a),
                                   float(k.b), float(spec.T), gen, int(spec.cap), record, snaps,
                                   audit_every)
    mu, indptr, idx, w, E0 = _arrays(spec)
    return _core.csr_exp(mu, indptr, idx, w, float(k.a), float(k.b), float(spec.T), E0, gen,
                         int(spec.cap), record, snaps, audit_every)


def _check(status, n_events, t, n_ties, spec):
    if status == _core.EXPLODED:
        raise ExplosionError(f"event cap {spec.cap} reached at t={t:.6g}", n_events, t)
    if n_ties:
        warnings.warn(f"{n_ties} exact tie(s) between jump times", TieWarning, stacklevel=3)


def _resolve(spec, method):
    if method == "auto":
        return "fast" if spec.fast else "generic"
    if method == "fast" and not spec.fast:
        raise ValueError("the compiled path needs an exponential kernel and a linear map")
    if method not in ("fast", "generic"):
        raise ValueError(f"unknown method {method!r}")
    return method


def simulate(spec: SystemSpec, rng: np.random.Generator | None = None, method: str = "auto",
             audit: bool = False, audit_every: int = AUDIT_EVERY) -> EventLog:
    """One realization on ``[0, T]`` by thinning.

    ``rng`` defaults to the stream of ``spec.seed``.  With ``audit`` a
    deterministic 1 in ``audit_every`` subset of thinning decisions is kept
    for :func:`audit_log`.
    """
    gen = generator(spec.seed) if rng is None else rng
    every = audit_every if audit else 0
    if _resolve(spec, method) == "fast":
        (status, t, n_ev, n_cand, n_ties, _, _, ev_node, ev_time, au_node, au_f,
         au_acc) = _run_fast(spec, gen, True, np.zeros(0), every)
        records = AuditRecords(au_node.copy(), au_f[:, 0].copy(), au_f[:, 1].copy(),
                               au_f[:, 2].copy(), au_f[:, 3].copy(), au_acc.copy())
    else:
        nodes, times, n_cand, n_ties, status, rows = simulate_generic(spec, gen, every)
        n_ev, t = len(times), (times[-1] if times else 0.0)
        ev_node = np.asarray(nodes, dtype=np.int64)
        ev_time = np.asarray(times, dtype=float)
        arr = np.asarray([r[1:5] for r in rows], dtype=float).reshape(-1, 4)
        records = AuditRecords(np.asarray([r[0] for r in rows], dtype=np.int64), arr[:, 0], arr[:, 1],
                               arr[:, 2], arr[:, 3], np.asarray([r[5] for r in rows], dtype=bool))
    _check(status, n_ev, t, n_ties, spec)
    return EventLog(ev_node, ev_time, spec.n_nodes, spec.T, int(n_cand), int(n_ties),
                    records if audit else None)


def simulate_counts(spec: SystemSpec, snapshots=None, rng: np.random.Generator | None = None,
                    method: str = "auto") -> CountSnapshots:
    """Per-node counts at ``snapshots`` (default ``[T]``) without keeping the events."""
    gen = generator(spec.seed) if rng is None else rng
    snaps = np.sort(np.asarray([spec.T] if snapshots is None else snapshots, dtype=float))
    if np.any(snaps > spec.T) or np.any(snaps < 0):
        raise ValueError("snapshot times must lie in [0, T]")
    if _resolve(spec, method) == "fast":
        status, t, n_ev, n_cand, n_ties, _, snap_counts, *_ = _run_fast(spec, gen, False, snaps, 0)
        _check(status, n_ev, t, n_ties, spec)
        return CountSnapshots(snaps, snap_counts, int(n_ev), int(n_cand))
    log = simulate(spec, gen, method="generic")
    counts = np.stack([log.counts_at(s) for s in snaps]) if snaps.size else np.zeros((0, spec.n_nodes))
    return CountSnapshots(snaps, counts, log.n_events, log.n_candidates)


@dataclass
class CoupledResult:
    first: EventLog
    second: EventLog
    #: per node, number of candidates accepted by exactly one system
    total_variation: np.ndarray
    #: per node, ``sup_t |Z^A_t - Z^B_t|``
    sup_difference: np.ndarray
    n_candidates: int

    def __iter__(self):
        return iter((self.first, self.second))


def simulate_coupled(specA: SystemSpec, specB: SystemSpec,
                     rng: np.random.Generator | None = None) -> CoupledResult:
    """Two systems driven by the same Poisson marks.

    Candidates come from the node-wise maximum of both bounds; each system
    accepts a mark ``(s, z)`` iff ``z`` lies under its own intensity, so each
    marginal is an exact realization of its spec.
    """
    gen = generator(specA.seed) if rng is None else rng
    logA, logB, tv, sup_d, n_cand, status, t = simulate_coupled_generic(specA, specB, gen)
    if status:
        raise ExplosionError("event cap reached in coupled run", len(logA[1]) + len(logB[1]), t)
    T = min(specA.T, specB.T)
    a = EventLog(np.asarray(logA[0], dtype=np.int64), np.asarray(logA[1]), specA.n_nodes, T, n_cand)
    b = EventLog(np.asarray(logB[0], dtype=np.int64), np.asarray(logB[1]), specB.n_nodes, T, n_cand)
    return CoupledResult(a, b, tv, sup_d, n_cand)


# -- compensators -----------------------------------------------------------

def _weighted_compensator(kernel, ev_t, ev_w, q):
    """``sum_{t_e < q} w_e Phi(q - t_e)`` with ``Phi`` the kernel primitive."""
    ev_t = np.asarray(ev_t, dtype=float)
    ev_w = np.asarray(ev_w, dtype=float)
    q = np.asarray(q, dtype=float)
    if isinstance(kernel, K.Exponential):
        order = np.argsort(ev_t, kind="stable")
        return _core.weighted_exp_compensator(float(kernel.a), float(kernel.b), ev_t[order],
                                              ev_w[order], q)
    out = np.zeros(q.size)
    step = max(1, 2_000_000 // max(ev_t.size, 1))
    for lo in range(0, q.size, step):
        qq = q[lo:lo + step, None]
        lag = qq - ev_t[None, :]
        out[lo:lo + step] = np.sum(np.where(lag > 0, ev_w * kernel.integral(lag), 0.0), axis=1)
    return out


def compensator(log: EventLog, spec: SystemSpec, node: int, q) -> np.ndarray:
    """``Lambda^node(q) = int_0^q lambda^node``; exact for a linear map."""
    q = np.asarray(q, dtype=float)
    topo = spec.topology
    if not isinstance(spec.intensity, Linear):
        return _numeric_compensator(log, spec, node, q)
    src, w = topo.in_neighbours(node)
    wmap = np.zeros(spec.n_nodes)
    np.add.at(wmap, src, w)
    ev_w = wmap[log.nodes]
    keep = ev_w != 0
    ev_t, ev_w = log.times[keep], ev_w[keep]
    if spec.impulse is not None and wmap[spec.impulse] != 0:
        ev_t = np.concatenate([[0.0], ev_t])
        ev_w = np.concatenate([[wmap[spec.impulse]], ev_w])
    mu = spec.baseline()[node]
    return mu * q + _weighted_compensator(spec.kernel, ev_t, ev_w, q)


def _numeric_compensator(log, spec, node, q):
    # Gauss-Legendre between consecutive global jumps, where the intensity is smooth
    model = HistoryModel(spec)
    xg, wg = np.polynomial.legendre.leggauss(16)

    def piece(lo, hi):
        if hi <= lo:
            return 0.0
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        return half * sum(wi * model.intensity(node, mid + half * xi) for xi, wi in zip(xg, wg))

    out = np.empty(q.size)
    acc, last, e = 0.0, 0.0, 0
    for j in np.argsort(q):
        target = q[j]
        while e < log.n_events and log.times[e] < target:
            acc += piece(last, log.times[e])
            last = float(log.times[e])
            model.add(int(log.nodes[e]), last)
            e += 1
        acc += piece(last, target)
        last = max(last, target)
        out[j] = acc
    return out


def residuals(log: EventLog, spec: SystemSpec) -> list[np.ndarray]:
    """Per-node compensator increments between consecutive jumps (first from 0)."""
    out = []
    for i in range(spec.n_nodes):
        ti = log.node_times(i)
        if ti.size == 0:
            out.append(np.zeros(0))
            continue
        c = compensator(log, spec, i, ti)
        out.append(np.diff(np.concatenate([[0.0], c])))
    return out


def residuals_total(log: EventLog, spec: SystemSpec) -> np.ndarray:
    """Compensator increments of the total process ``sum_i Z^i``."""
    if not isinstance(spec.intensity, Linear):
        raise NotImplementedError("total-process residuals need a linear map")
    if log.n_events == 0:
        return np.zeros(0)
    src, _, w = spec.topology.edges()
    outw = np.zeros(spec.n_nodes)
    np.add.at(outw, src, w)
    ev_t, ev_w = log.times, outw[log.nodes]
    if spec.impulse is not None:
        ev_t = np.concatenate([[0.0], ev_t])
        ev_w = np.concatenate([[outw[spec.impulse]], ev_w])
    c = spec.baseline().sum() * log.times + _weighted_compensator(spec.kernel, ev_t, ev_w, log.times)
    return np.diff(np.concatenate([[0.0], c]))


# -- audit --------------------------------------------------------------------

@dataclass
class AuditReport:
    n_checked: int
    n_mismatched: int
    max_relative_error: float
    bound_violations: int

    @property
    def passed(self) -> bool:
        return self.n_mismatched == 0 and self.bound_violations == 0


def audit_log(log: EventLog, spec: SystemSpec, rtol: float = 1e-9) -> AuditReport:
    """Re-evaluate audited thinning decisions from the full history.

    For each record the intensity is recomputed by direct summation over every
    jump of the log strictly before the candidate time; the decision must
    agree with ``mark <= intensity`` and the bound must dominate.
    """
    rec = log.audit
    if rec is None:
        raise ValueError("log was simulated without audit mode")
    model = HistoryModel(spec)
    order = np.argsort(rec.time)
    e = 0
    mism = viol = 0
    worst = 0.0
    for r in order:
        s = rec.time[r]
        while e < log.n_events and log.times[e] < s:
            model.add(int(log.nodes[e]), float(log.times[e]))
            e += 1
        k = int(rec.node[r])
        lam = model.intensity(k, s)
        worst = max(worst, abs(lam - rec.intensity[r]) / max(abs(lam), 1e-300))
        margin = rtol * max(abs(lam), 1.0)
        if abs(rec.mark[r] - lam) > margin and bool(rec.mark[r] <= lam) != bool(rec.accepted[r]):
            mism += 1
        if rec.bound[r] < lam * (1 - rtol):
            viol += 1
    return AuditReport(len(rec), mism, worst, viol)
