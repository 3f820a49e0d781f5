"""PNG rendering of the figure tables (non-interactive Agg backend)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .figures import Table  # noqa: E402


def _group(rows: Table, key: str) -> dict:
    out = defaultdict(list)
    for r in rows:
        out[r[key]].append(r)
    return out


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_curves(rows: Table, path: Path, ylabel: str = "G_J(X)", field: str = "value") -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    for J, rs in _group(rows, "J").items():
        ax.plot([r["X"] for r in rs], [r[field] for r in rs], label=f"J={J}", lw=1)
    ax.set_xlabel("X")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)


def plot_boundaries(rows: Table, path: Path, inset: Table | None = None) -> Path:
    style = {"nonlinear": "-", "tangent": "--", "duan": ":"}
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, rs in _group(rows, "curve").items():
        ax.plot([r["second_moment_perp"] for r in rs], [r["var_Jx"] for r in rs],
                style.get(name, "-"), color="k", lw=1, label=name)
    ax.set_xlabel(r"$\langle J_y^2+J_z^2\rangle$")
    ax.set_ylabel(r"$(\Delta J_x)^2$")
    ax.legend(fontsize=8, loc="upper left")
    if inset:
        sub = ax.inset_axes([0.55, 0.12, 0.4, 0.35])
        for k, rs in _group(inset, "k").items():
            sub.plot([r["second_moment_perp"] for r in rs], [r["var_Jx"] for r in rs], lw=0.8)
        sub.tick_params(labelsize=6)
    return _save(fig, path)


def plot_depths(rows: Table, path: Path) -> Path:
    rows = [r for r in rows if r["mu"] > 0]
    fig, ax = plt.subplots(figsize=(5, 4))
    mu = [r["mu"] for r in rows]
    ax.semilogx(mu, [r["depth_nonlinear"] for r in rows], "-", color="k", label="second moments")
    ax.semilogx(mu, [r["depth_sm"] for r in rows], "--", color="k", label="polarisation")
    ax.set_xlabel(r"$\mu$")
    ax.set_ylabel("certified depth")
    ax.legend(fontsize=8)
    return _save(fig, path)
