"""Static EWM trace images rendered from an EWM CSV."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_ewm_csv  # noqa: E402

PANELS = (
    ("log_det_mvee", "log det MVEE"),
    ("h_pi", "H_pi"),
    ("prune_count", "prune count"),
    ("sigma_k", "sigma_k"),
    ("necessity", "necessity"),
    ("surprisal", "surprisal"),
    ("w_ep", "W_ep"),
    ("alpha_c", "alpha_c"),
)


def _measured(cols):
    keep = np.array([s != "-" for s in cols["station"]], dtype=bool)
    return {k: np.asarray(v, dtype=object)[keep] for k, v in cols.items()}


def plot_ewm(csv_path, out_dir, per_panel: bool = False) -> list[Path]:
    """Write ``ewm.png`` (all traces against time in days) and optionally one image per trace."""
    cols = _measured(read_ewm_csv(csv_path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = cols["t"].astype(float)
    written = []

    fig, axes = plt.subplots(len(PANELS) // 2, 2, figsize=(11, 10), sharex=True)
    for ax, (key, label) in zip(axes.flat, PANELS):
        _trace(ax, t, cols[key].astype(float), label)
        if key == "log_det_mvee":
            ax.axhline(0.0, color="k", lw=0.6, ls="--")
    for ax in axes[-1]:
        ax.set_xlabel("t [days]")
    fig.tight_layout()
    p = out / "ewm.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)

    if per_panel:
        for key, label in PANELS:
            fig, ax = plt.subplots(figsize=(7, 3))
            _trace(ax, t, cols[key].astype(float), label)
            ax.set_xlabel("t [days]")
            fig.tight_layout()
            p = out / f"{key}.png"
            fig.savefig(p, dpi=110)
            plt.close(fig)
            written.append(p)
    return written


def _trace(ax, t, y, label):
    ax.plot(t, y, lw=0.8, marker=".", ms=2)
    ax.set_ylabel(label)
    ax.grid(alpha=0.3)
