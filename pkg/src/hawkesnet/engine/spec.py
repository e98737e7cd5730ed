"""System descriptions and simulation outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels as K
from ..graph import Complete, LatticeBox, Topology
from ..intensity import Linear, Lipschitz, as_intensity

DEFAULT_CAP = 10**7


@dataclass(frozen=True)
class SystemSpec:
    """A finite Hawkes system on ``topology``.

    ``impulse`` names a node carrying a virtual, unrecorded jump at time 0:
    its out-neighbours ``i`` receive the deterministic kick ``w_ji phi(t)``.
    """

    topology: Topology
    kernel: K.Kernel
    intensity: Linear | Lipschitz
    T: float
    seed: int = 0
    impulse: int | None = None
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        object.__setattr__(self, "intensity", as_intensity(self.intensity))
        if not self.T >= 0:
            raise ValueError("T must be nonnegative")
        if self.impulse is not None and not 0 <= self.impulse < self.topology.n_nodes:
            raise ValueError("impulse node outside the topology")

    @property
    def n_nodes(self) -> int:
        return self.topology.n_nodes

    @property
    def fast(self) -> bool:
        return isinstance(self.kernel, K.Exponential) and isinstance(self.intensity, Linear)

    def baseline(self) -> np.ndarray:
        if isinstance(self.intensity, Linear):
            return self.intensity.baseline(self.n_nodes)
        return self.intensity.value_at_zero(self.n_nodes)

    def to_config(self) -> dict:
        h = self.intensity
        cfg = {"topology": self.topology.to_config(), "kernel": self.kernel.to_config(), "T": self.T,
               "seed": self.seed, "cap": self.cap}
        if isinstance(h, Linear):
            mu = np.asarray(h.mu, dtype=float)
            cfg["mu"] = float(mu) if mu.ndim == 0 else mu.tolist()
        if self.impulse is not None:
            cfg["impulse"] = self.impulse
        return cfg


def impulsion_spec(topo: LatticeBox, kernel: K.Kernel, T: float, seed: int = 0,
                   cap: int = DEFAULT_CAP) -> SystemSpec:
    """Zero baselines, impulse at the origin."""
    return SystemSpec(topo, kernel, Linear(0.0), T, seed, impulse=topo.origin, cap=cap)


@dataclass
class AuditRecords:
    node: np.ndarray
    time: np.ndarray
    mark: np.ndarray
    bound: np.ndarray
    intensity: np.ndarray
    accepted: np.ndarray

    def __len__(self):
        return self.node.size


@dataclass
class EventLog:
    """Jumps of one realization in global time order."""

    nodes: np.ndarray
    times: np.ndarray
    n_nodes: int
    T: float
    n_candidates: int = 0
    n_ties: int = 0
    audit: AuditRecords | None = field(default=None, repr=False)

    def __len__(self):
        return self.times.size

    @property
    def n_events(self) -> int:
        return self.times.size

    def node_times(self, i: int) -> np.ndarray:
        return self.times[self.nodes == i]

    def counts(self) -> np.ndarray:
        return np.bincount(self.nodes, minlength=self.n_nodes)

    def counts_at(self, t: float) -> np.ndarray:
        m = self.times <= t
        return np.bincount(self.nodes[m], minlength=self.n_nodes)

    def acceptance_rate(self) -> float:
        return self.n_events / self.n_candidates if self.n_candidates else float("nan")

    def to_csv(self, path, header_lines=()):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("node,time\n")
            for k, t in zip(self.nodes.tolist(), self.times.tolist()):
                fh.write(f"{k},{t!r}\n")

    @classmethod
    def from_csv(cls, path, n_nodes: int, T: float) -> "EventLog":
        nodes, times = [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#") or line.startswith("node"):
                    continue
                k, t = line.strip().split(",")
                nodes.append(int(k))
                times.append(float(t))
        return cls(np.asarray(nodes, dtype=np.int64), np.asarray(times), n_nodes, T)


@dataclass
class CountSnapshots:
    """Per-node counts at requested times, without the event list."""

    times: np.ndarray
    counts: np.ndarray
    n_events: int
    n_candidates: int

    def at(self, t: float) -> np.ndarray:
        j = int(np.flatnonzero(np.isclose(self.times, t))[0])
        return self.counts[j]


def is_meanfield(topo: Topology) -> bool:
    return isinstance(topo, Complete)
