"""Figures rendered next to the CSV outputs of the CLI."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

__all__ = ["plot_series", "plot_rmse", "plot_qq", "plot_coverage"]

_RC = {
    "figure.dpi": 120,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_series(path, obs) -> Path:
    with plt.rc_context(_RC):
        fig, (ax_y, ax_x) = plt.subplots(2, 1, figsize=(7, 4.5), sharex=True)
        t = np.arange(obs.y.size)
        ax_y.plot(t, obs.y, lw=0.7)
        ax_y.set_ylabel("Y (variance)")
        ax_x.plot(t, obs.x, lw=0.7, color="C1")
        ax_x.set_ylabel("X (log-price)")
        ax_x.set_xlabel("i")
        return _save(fig, path)


def plot_rmse(path, report) -> Path:
    """RMSE against n on log-log axes, with an n^{-1/2} guide line."""
    ns = np.array([rep.n for rep in report.per_n], dtype=float)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
        for ax, layer_name in zip(axes, ("transformed", "original")):
            rmse = np.array([getattr(rep, layer_name).rmse for rep in report.per_n])
            names = getattr(report.per_n[0], layer_name).names
            for j, name in enumerate(names):
                ax.loglog(ns, rmse[:, j], "o-", ms=3, label=name)
            finite = rmse[np.isfinite(rmse)]
            if finite.size and ns.size > 1:
                ref = np.nanmax(rmse[0]) * np.sqrt(ns[0] / ns)
                ax.loglog(ns, ref, "k--", lw=0.8, label=r"$n^{-1/2}$")
            ax.set_xlabel("n")
            ax.set_ylabel("RMSE")
            ax.set_title(layer_name)
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_qq(path, report) -> Path:
    """Normal QQ plot of whitened errors at the largest n."""
    rep = report.per_n[-1]
    w = rep.original.whitened
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 4, figsize=(10, 2.8), sharey=True)
        m = w.shape[0]
        if m:
            q = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
        for j, ax in enumerate(axes):
            if m:
                ax.plot(q, np.sort(w[:, j]), ".", ms=2)
                ax.plot(q, q, "k-", lw=0.6)
            ax.set_title(f"{rep.original.names[j]} (n={rep.n})")
            ax.set_xlabel("normal quantile")
        axes[0].set_ylabel("whitened error")
        return _save(fig, path)


def plot_coverage(path, report) -> Path:
    level = report.config.level
    ns = [rep.n for rep in report.per_n]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.4))
        cov = np.array([rep.coverage for rep in report.per_n])
        names = report.per_n[0].original.names
        for j, name in enumerate(names):
            ax.semilogx(ns, cov[:, j], "o-", ms=3, label=name)
        ax.axhline(level, color="k", lw=0.8, ls="--")
        ax.set_xlabel("n")
        ax.set_ylabel("empirical coverage")
        ax.set_ylim(max(0.0, level - 0.2), 1.0)
        ax.legend(frameon=False)
        return _save(fig, path)
