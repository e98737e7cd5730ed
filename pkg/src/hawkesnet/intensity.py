"""Intensity maps ``h`` turning the convolved history into a jump rate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Linear:
    """``h_i(x) = mu_i + x``.  ``mu`` is a scalar or one value per node."""

    mu: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.mu) < 0):
            raise ValueError("baselines must be nonnegative")

    lipschitz = 1.0

    def baseline(self, n_nodes: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.mu, dtype=float), (n_nodes,)).copy()

    def value_at_zero(self, n_nodes: int = 1) -> np.ndarray:
        return self.baseline(n_nodes)

    def __call__(self, x, node=None):
        mu = np.asarray(self.mu, dtype=float)
        if node is not None and mu.ndim:
            mu = mu[node]
        return mu + x


@dataclass(frozen=True)
class Lipschitz:
    """Nonnegative Lipschitz map ``h`` shared by all nodes."""

    h: Callable
    lipschitz: float
    at_zero: float | None = None

    def __post_init__(self):
        if not self.lipschitz >= 0:
            raise ValueError("lipschitz constant must be nonnegative")

    def value_at_zero(self, n_nodes: int = 1) -> np.ndarray:
        h0 = float(self.h(0.0)) if self.at_zero is None else float(self.at_zero)
        return np.full(n_nodes, h0)

    def __call__(self, x, node=None):
        return self.h(x)


def as_intensity(h):
    """Accept a float baseline as shorthand for a linear map."""
    if isinstance(h, (Linear, Lipschitz)):
        return h
    return Linear(h)
