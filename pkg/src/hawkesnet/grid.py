"""Uniformly sampled functions of time."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridFunction:
    """Values of a function on the uniform grid ``t0 + k * dt``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("values must be a non-empty 1-d sequence")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.values.size - 1)

    def __call__(self, t):
        """Linear interpolation; constant extrapolation outside the grid."""
        return np.interp(t, self.times, self.values)

    def cumulative_integral(self) -> "GridFunction":
        """Running trapezoidal integral, zero at ``t0``."""
        v = self.values
        out = np.zeros_like(v)
        out[1:] = np.cumsum(0.5 * self.dt * (v[1:] + v[:-1]))
        return GridFunction(self.t0, self.dt, out)

    def integral(self) -> float:
        return float(self.cumulative_integral().values[-1])

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "value"])
            for t, v in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
        if rows[0] != ["t", "value"]:
            raise ValueError(f"unexpected header {rows[0]!r}")
        data = np.array(rows[1:], dtype=float)
        t = data[:, 0]
        dt = t[1] - t[0] if t.size > 1 else 1.0
        return cls(float(t[0]), float(dt), data[:, 1])
