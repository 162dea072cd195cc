"""
Figure rendering for the CLI's ``--plot`` option.

Each function writes one image next to the CSV it was built from and
returns the path. Uses the non-interactive Agg backend.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

_MARKERS = {"ls": "o", "mmse": "s", "rsls": "^", "rsls-iso": "d"}
_LABELS = {"ls": "LS", "mmse": "MMSE", "rsls": "RS-LS", "rsls-iso": "RS-LS, isotropic"}


def _figure(width=5.0, height=None):
    golden = (np.sqrt(5) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height or width * golden))


def plot_acf(records, path: str | Path) -> Path:
    """Empirical vs closed-form ACF: line plot for 1D lags, surfaces for 2D."""
    path = Path(path)
    lx = np.array([r.lag_x for r in records])
    ly = np.array([r.lag_y for r in records])
    emp = np.array([r.empirical for r in records])
    ref = np.array([r.closed_form for r in records])
    with plt.rc_context(_STYLE):
        if np.all(ly == 0):
            fig, ax = _figure()
            ax.plot(lx, ref, "k-", label="closed form")
            ax.plot(lx, emp, "o", ms=3, mfc="none", label="empirical")
            ax.set_xlabel(r"$x/\lambda$")
            ax.set_ylabel("ACF")
            ax.legend()
        else:
            xs, ys = np.unique(lx), np.unique(ly)
            # records are ordered with x varying fastest
            shape = (len(ys), len(xs))
            fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
            for ax, z, title in ((axes[0], emp, "empirical"), (axes[1], ref, "closed form")):
                im = ax.pcolormesh(xs, ys, z.reshape(shape), shading="nearest", vmin=-0.25, vmax=1.0)
                ax.set_title(title)
                ax.set_xlabel(r"$x/\lambda$")
                ax.set_aspect("equal")
            axes[0].set_ylabel(r"$y/\lambda$")
            fig.colorbar(im, ax=axes, shrink=0.8)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_nmse(records, path: str | Path) -> Path:
    path = Path(path)
    with plt.rc_context(_STYLE):
        fig, ax = _figure()
        for name in dict.fromkeys(r.estimator for r in records):
            rows = [r for r in records if r.estimator == name]
            snr = [r.snr_db for r in rows]
            ax.plot(snr, [r.nmse_db for r in rows], marker=_MARKERS.get(name, "x"), ms=4, label=_LABELS.get(name, name))
            if rows[0].analytic_nmse is not None:
                ax.plot(snr, [r.analytic_db for r in rows], "k:", lw=0.8)
        ax.set_xlabel("SNR [dB]")
        ax.set_ylabel("NMSE [dB]")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_spectrum(eigenvalues: Sequence[float], path: str | Path, marks: dict[str, float] | None = None) -> Path:
    """Normalized eigenvalue profile on a log scale, with optional rank markers."""
    path = Path(path)
    w = np.asarray(eigenvalues, dtype=float)
    rel = np.clip(w / w[0], 1e-18, None)
    with plt.rc_context(_STYLE):
        fig, ax = _figure()
        ax.semilogy(np.arange(1, len(w) + 1), rel, "-")
        for label, x in (marks or {}).items():
            ax.axvline(x, ls="--", lw=0.8, color="gray")
            ax.text(x, 1e-2, f" {label}", rotation=90, va="bottom", fontsize=8)
        ax.set_xlabel("eigenvalue index")
        ax.set_ylabel(r"$\lambda_i / \lambda_1$")
        fig.savefig(path)
        plt.close(fig)
    return path
