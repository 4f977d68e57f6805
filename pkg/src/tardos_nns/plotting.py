"""Matplotlib figures written next to the CSV/JSON reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
}


def plot_candidate_probability(report, path) -> None:
    """Running average of 'score was computed' against the exact user score."""
    running, binned = report.running, report.bins
    colluder_scores = np.concatenate(
        [t.scores[t.is_colluder] for t in report.trials])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(running["score"], running["candidate_probability"], lw=1.2,
                label=f"running average ({running['window']} users)")
        keep = np.asarray(binned["users"]) >= binned["min_count"]
        mids = (np.asarray(binned["lower"]) + np.asarray(binned["upper"])) / 2
        ax.plot(mids[keep], np.asarray(binned["candidate_probability"])[keep], "o", ms=3,
                label="score bins")
        ax.plot(colluder_scores, np.full(colluder_scores.size, 1.02), "|", color="C3",
                ms=8, label="colluder scores")
        ax.set_xlabel("user score $s_j$")
        ax.set_ylabel("fraction of scores computed")
        ax.set_ylim(-0.02, 1.06)
        ax.legend(loc="upper left", frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_tradeoff_curve(alpha: float, rho_s, rho_q, path) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(rho_s, rho_q, marker=".", lw=1.2)
        ax.set_xlabel(r"space exponent $\rho_s$")
        ax.set_ylabel(r"query exponent $\rho_q$")
        ax.set_title(rf"$\alpha = {alpha:.4g}$")
        ax.set_ylim(bottom=0)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
