"""Artifact writers: CSV, key-value summaries, and SVG rate plots.

Every artifact starts with the same provenance line (schema version, config
hash, seed) and is byte-reproducible: floats are written with repr (shortest
round-trip), and the SVG backend is salted with the config hash and stripped
of timestamps.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .rates import RateFit

__all__ = [
    "SCHEMA_VERSION",
    "config_hash",
    "provenance_line",
    "write_csv",
    "write_keyvalues",
    "write_loglog_svg",
]

SCHEMA_VERSION = 1


def config_hash(config: Mapping) -> str:
    """12-hex digest of the canonicalized configuration mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def provenance_line(cfg_hash: str, seed: int) -> str:
    return f"schema={SCHEMA_VERSION} config={cfg_hash} seed={seed}"


def _fmt(value) -> str:
    # numpy scalars repr as np.float64(...) on recent numpy; unwrap first
    if isinstance(value, np.integer):
        value = int(value)
    elif isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(
    path: str | Path,
    columns: list[str],
    rows: Iterable[Iterable],
    cfg_hash: str,
    seed: int,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {provenance_line(cfg_hash, seed)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_keyvalues(
    path: str | Path, items: Mapping, cfg_hash: str, seed: int
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# {provenance_line(cfg_hash, seed)}\n")
        for key, value in items.items():
            fh.write(f"{key} = {_fmt(value)}\n")


def write_loglog_svg(
    path: str | Path,
    fit: RateFit,
    cfg_hash: str,
    seed: int,
    title: str = "median L1 error vs n",
    target: float | None = None,
) -> None:
    """Static log-log rate plot with the fitted slope annotated."""
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": cfg_hash}):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.loglog(fit.n_values, fit.medians, "o-", label=fit.column)
        import numpy as np

        ns = np.array(fit.n_values, dtype=float)
        ax.loglog(
            ns,
            np.exp(fit.intercept) * ns**fit.slope,
            "--",
            label=f"slope {fit.slope:.3f}",
        )
        if target is not None:
            anchor = np.exp(fit.intercept) * ns[0] ** fit.slope
            ax.loglog(
                ns,
                anchor * (ns / ns[0]) ** target,
                ":",
                label=f"target {target:.3f}",
            )
        ax.set_xlabel("n")
        ax.set_ylabel("median error")
        ax.set_title(title)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(
            path,
            format="svg",
            metadata={"Date": None, "Description": provenance_line(cfg_hash, seed)},
        )
        plt.close(fig)
