"""Report figures (rendered off-screen to image files)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
}
# no timestamp or version text in the files, so reruns are byte-identical
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def metrics_figure(rows, path):
    """Per-phase HD/MSD bars and BCR/BCS markers."""
    rows = sorted(rows, key=lambda r: r.phase)
    ph = np.array([r.phase for r in rows])
    with plt.rc_context(_STYLE):
        fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6.4, 4.8), sharex=True)
        w = 0.4
        ax0.bar(ph - w / 2, [r.hd_mm for r in rows], w, label="HD")
        ax0.bar(ph + w / 2, [r.msd_mm for r in rows], w, label="MSD")
        ax0.set_ylabel("distance (mm)")
        ax0.legend(frameon=False, ncol=2)
        ax1.plot(ph, [r.bcr for r in rows], "o-", ms=3, label="BCR")
        ax1.plot(ph, [r.bcs for r in rows], "s--", ms=3, label="BCS")
        ax1.axhline(1.0, color="0.5", lw=0.8)
        ax1.set_xlabel("phase")
        ax1.set_xticks(ph)
        ax1.legend(frameon=False, ncol=2)
        fig.tight_layout()
        return _save(fig, path)


def constraints_figure(report, path, t=None):
    """Per-frame bend angle, strain and displacement against their limits."""
    n = len(report.max_bend_deg)
    x = np.arange(n) if t is None else np.asarray(t)
    with plt.rc_context(_STYLE):
        fig, axs = plt.subplots(3, 1, figsize=(6.4, 5.6), sharex=True)
        axs[0].plot(x, report.max_bend_deg, lw=1.2)
        axs[0].set_ylabel("max bend (deg)")
        axs[1].plot(x, report.max_strain, lw=1.2)
        axs[1].set_ylabel("max strain")
        axs[2].plot(x, report.max_displacement_mm, lw=1.2)
        axs[2].axhline(report.delta_mm, color="C3", lw=0.8, ls="--")
        axs[2].set_ylabel("step (mm)")
        axs[2].set_xlabel("t (period)" if t is not None else "frame")
        fig.tight_layout()
        return _save(fig, path)


def weights_figure(points, W, path, handle=0):
    """Scatter of one handle's weight along the principal axis of the points."""
    P = np.asarray(points, dtype=float)
    c = P - P.mean(axis=0)
    axis = np.linalg.svd(c, full_matrices=False)[2][0]
    s = c @ axis
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 3.2))
        vals = W.values if hasattr(W, "values") else np.asarray(W)
        ax.scatter(s, vals[: len(P), handle], s=2, alpha=0.5)
        ax.set_xlabel("position along principal axis (mm)")
        ax.set_ylabel(f"weight of handle {handle}")
        fig.tight_layout()
        return _save(fig, path)
