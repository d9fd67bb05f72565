"""Figures written next to the CSV outputs when ``--plot`` is given."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 6.0
colors = ["#08589e", "#e34a33", "#2b8cbe", "#7bccc4"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 10,
    "font.family": "sans-serif",
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "lines.linewidth": 1,
    "svg.hashsalt": "einstein27",
}

# no timestamp or version string in the file, so reruns are byte-identical
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def plot_pattern(profile, peaks, path, nbins=3000):
    """Screen intensity (mass per bin, log scale) with the diffraction orders marked."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        mass, edges = np.histogram(profile.positions, bins=nbins, weights=profile.weights)
        centers = 0.5 * (edges[1:] + edges[:-1])
        ax.semilogy(centers, np.clip(mass, 1e-12, None), drawstyle="steps-mid")
        for r in peaks:
            ax.axvline(r.x, color="0.6", lw=0.6, ls="--")
            ax.annotate(f"m={r.order}\n{r.fraction:.3f}", (r.x, 1e-2), ha="center", fontsize=7)
        ax.set_xlabel("screen position x (m)")
        ax.set_ylabel("fraction of photons per bin")
        ax.set_ylim(1e-12, 1)
        _save(fig, path)


def plot_histograms(hists, estimates, path):
    """Coincidence histograms of several runs on one axis, estimated delays marked."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for (label, h), c in zip(hists.items(), colors):
            ax.step(h.centers / 1000.0, h.counts, where="mid", label=label, color=c)
            est = estimates.get(label)
            if est is not None:
                ax.axvline(est.tau_star / 1000.0, color=c, lw=0.6, ls="--")
        ax.set_xlabel("delay (ns)")
        ax.set_ylabel("coincidences per bin")
        ax.set_yscale("symlog", linthresh=10)
        ax.legend(frameon=False)
        _save(fig, path)
