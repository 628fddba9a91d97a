"""Matplotlib renderings of experiment tables, written next to the CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def risk_curve_figure(summary: list[dict], path) -> Path:
    """Mean risk against n on log-log axes, with standard-error bars."""
    path = Path(path)
    n = [s["n"] for s in summary]
    risk = [s["mean_risk"] for s in summary]
    err = [s["se_risk"] for s in summary]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.errorbar(n, risk, yerr=err, marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("mean squared Hellinger risk")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def rate_fit_figure(fit: dict, path) -> Path:
    """Log-log regression of risk on log(n)/n, with the fitted line."""
    path = Path(path)
    n = np.asarray(fit["n_values"], dtype=float)
    x = np.log(np.log(n) / n)
    y = np.log(fit["mean_risks"])
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(x, y, "o", label="mean risk")
    grid = np.linspace(x.min(), x.max(), 50)
    ax.plot(
        grid,
        fit["intercept"] + fit["slope"] * grid,
        "-",
        label=f"slope {fit['slope']:.3f}",
    )
    ax.set_xlabel("log(log n / n)")
    ax.set_ylabel("log mean risk")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def occupation_figure(masses: np.ndarray, path, title: str = "occupation") -> Path:
    """Heatmap of a (state cell, control cell) occupation grid."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.0, 4))
    im = ax.imshow(
        np.asarray(masses).T, origin="lower", aspect="auto", cmap="viridis"
    )
    ax.set_xlabel("state cell")
    ax.set_ylabel("control cell")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="mass")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def kac_margin_figure(rows: list[dict], path) -> Path:
    """Margins of the recurrence inequality per family (log n markers)."""
    path = Path(path)
    families = sorted({r["family"] for r in rows})
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for offset, family in enumerate(families):
        margins = [r["margin"] for r in rows if r["family"] == family]
        jitter = offset + 0.8 * np.linspace(-0.35, 0.35, len(margins))
        ax.plot(jitter, margins, ".", markersize=4, label=family)
    ax.axhline(0.0, color="red", linewidth=1)
    ax.set_xticks(range(len(families)))
    ax.set_xticklabels(families, rotation=20)
    ax.set_ylabel("occupation minus return-time bound")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def remainder_grid_figure(grid: list[dict], path) -> Path:
    """Heatmap of the remainder over an (n, T) parameter grid."""
    path = Path(path)
    n_values = sorted({g["n"] for g in grid})
    t_values = sorted({g["t"] for g in grid})
    z = np.full((len(t_values), len(n_values)), np.nan)
    for g in grid:
        z[t_values.index(g["t"]), n_values.index(g["n"])] = g["remainder"]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    im = ax.imshow(np.log10(z), origin="lower", aspect="auto", cmap="magma")
    ax.set_xticks(range(len(n_values)))
    ax.set_xticklabels(n_values)
    ax.set_yticks(range(len(t_values)))
    ax.set_yticklabels([f"{t:g}" for t in t_values])
    ax.set_xlabel("sample size n")
    ax.set_ylabel("worst return time T")
    fig.colorbar(im, ax=ax, label="log10 remainder")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def partition_figure(kernel, path, title: str = "fitted kernel") -> Path:
    """Footprint-plane slices of a fitted piecewise-constant kernel:
    one panel per next-state band, cells shaded by value."""
    path = Path(path)
    shape = kernel.shape
    if shape.d1 != 1 or shape.d2 != 1:
        raise ValueError("plotting supports scalar state and control only")
    bands = 4
    fig, axes = plt.subplots(1, bands, figsize=(3.0 * bands, 3.2), sharey=True)
    vmax = max(kernel.sup_norm(), 1e-12)
    for b, ax in enumerate(axes):
        y = (b + 0.5) / bands
        res = 64
        xs = (np.arange(res) + 0.5) / res
        grid = np.empty((res, res))
        for i, xv in enumerate(xs):
            for j, av in enumerate(xs):
                grid[j, i] = kernel(xv, av, y)
        im = ax.imshow(
            grid,
            origin="lower",
            extent=(0, 1, 0, 1),
            vmin=0.0,
            vmax=vmax,
            cmap="cividis",
        )
        ax.set_title(f"y in [{b / bands:.2f}, {(b + 1) / bands:.2f})", fontsize=8)
        ax.set_xlabel("state")
    axes[0].set_ylabel("control")
    fig.colorbar(im, ax=axes, shrink=0.8, label="density")
    fig.suptitle(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
