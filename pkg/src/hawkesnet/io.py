"""Output files: provenance headers, canonical JSON and optional SVG plots."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from . import __version__

OUTPUT_ENV = "HAWKESNET_OUTPUT_DIR"


def plain(obj):
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def canonical_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def header_lines(config: dict, seed) -> list[str]:
    return [f"hawkesnet {__version__}", f"config_sha256 {config_hash(config)}", f"seed {seed}",
            f"config {canonical_json(config)}"]


def output_dir(path=None) -> Path:
    """``path``, else ``$HAWKESNET_OUTPUT_DIR``, else the working directory."""
    out = Path(path or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_json(path, obj, config: dict, seed):
    doc = {"tool": f"hawkesnet {__version__}", "config_sha256": config_hash(config), "seed": seed,
           "config": config, "result": obj}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(plain(doc), sort_keys=True, indent=2, allow_nan=True))
        fh.write("\n")


def write_rows(path, columns, rows, lines=()):
    """Comma-separated rows with ``#`` header lines; floats in round-trip form."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row) + "\n")


def plot_svg(path, series, xlabel, ylabel, title="", loglog=False, scatter=False):
    """Line plot of ``series = [(label, x, y), ...]``; matplotlib is imported on demand."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in series:
        ax.plot(x, y, "o" if scatter else "-", label=label, markersize=3)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "hawkesnet"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
