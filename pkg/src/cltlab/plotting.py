"""SVG figures for the CLI reports.

Figures are drawn on a bare ``Figure`` (no pyplot state) and saved with a
fixed hash salt and no date stamp, so identical data gives identical bytes.
"""

import matplotlib
from matplotlib.figure import Figure
import numpy as np

STYLE = {
    "svg.hashsalt": "cltlab",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def rate_plot(n, D, tau_hat, intercept, path, bound=None):
    """Log-log plot of ``D_n`` against ``n`` with the fitted power law."""
    n = np.asarray(n, dtype=float)
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 3.6))
        ax = fig.add_subplot()
        ax.loglog(n, D, "o", color="C0", label=r"$D_n$")
        if bound is not None and np.all(np.isfinite(bound)):
            ax.loglog(n, bound, "s", color="C2", mfc="none", label="smoothing bound")
        grid = np.geomspace(n.min(), n.max(), 50)
        ax.loglog(
            grid,
            np.exp(intercept) * grid ** (-tau_hat),
            "-",
            color="C1",
            label=rf"fit $n^{{-{tau_hat:.3f}}}$",
        )
        ax.set_xlabel(r"$n$")
        ax.set_ylabel("Kolmogorov distance")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def spectral_plot(t, abs_lam, rho, path):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 3.6))
        ax = fig.add_subplot()
        ax.plot(t, abs_lam, "o-", label=r"$|\lambda(t)|$")
        ax.plot(t, rho, "s--", label=r"$\rho(t)$")
        ax.set_xlabel(r"$t$")
        ax.set_ylim(0.0, 1.05)
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def cf_plot(n, ratio, path):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 3.6))
        ax = fig.add_subplot()
        ax.semilogx(n, ratio, "o-")
        ax.set_xlabel(r"$n$")
        ax.set_ylabel(r"$\sqrt{n}\,\sup_t |\varphi_n(t)-e^{-t^2/2}|/|t|$")
        ax.set_ylim(bottom=0.0)
        fig.tight_layout()
        _save(fig, path)
