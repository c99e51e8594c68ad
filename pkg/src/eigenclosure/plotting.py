"""Figures written next to the CSV outputs of a run."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_sensitivity",
    "plot_kl",
    "plot_predictive",
    "plot_eigenvalues",
    "plot_traces",
    "plot_observations",
    "correlation_svg",
]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_observations(obs, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if obs.series_kind == "spatial":
        ax.plot(obs.x, obs.values, ".", ms=3)
        ax.set_xlabel("x")
    else:
        ax.plot(obs.t, obs.values, "o", ms=3)
        ax.set_xlabel("t")
    ax.set_ylabel("mean concentration")
    return _save(fig, path)


def plot_sensitivity(result, path):
    ei = np.maximum(result.eigen_index, 1e-30)
    k = np.arange(1, ei.size + 1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(k, ei, "o-", ms=3)
    ax.axhline(result.threshold, color="k", ls="--", lw=0.8, label="threshold")
    ax.set_xlabel("mode k")
    ax.set_ylabel("total-effect index")
    ax.set_ylim(bottom=max(ei.min(), 1e-20))
    ax.legend()
    return _save(fig, path)


def plot_kl(report, path):
    K = len(report.names) // 2
    k = np.arange(1, K + 1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(k, report.kl[:K], "o-", label="r_k (real part)")
    ax.plot(k, report.kl[K:], "s-", label="u_k (imaginary part)")
    ax.set_xlabel("mode k")
    ax.set_ylabel("KL divergence (nats)")
    ax.legend()
    return _save(fig, path)


def plot_predictive(pred, path, data=None, label="x"):
    """One panel per predictive time; ``data`` is an optional list of (x, values)."""
    n = pred.times.size
    fig, axes = plt.subplots(n, 1, figsize=(6, 2.4 * n), squeeze=False)
    for i, ax in enumerate(axes[:, 0]):
        ax.fill_between(pred.locations, pred.lower[i], pred.upper[i], color="C0", alpha=0.2,
                        label="draw envelope")
        ax.fill_between(pred.locations, pred.mean[i] - 2 * pred.std[i], pred.mean[i] + 2 * pred.std[i],
                        color="C0", alpha=0.4, label="mean +/- 2 std")
        ax.plot(pred.locations, pred.mean[i], color="C0", lw=1)
        if data is not None and data[i] is not None:
            ax.plot(data[i][0], data[i][1], "k.", ms=2, label="reference")
        ax.axhline(0.0, color="grey", lw=0.5)
        ax.set_title(f"t = {pred.times[i]:g}", fontsize=9)
        ax.set_xlabel(label)
    axes[0, 0].legend(fontsize=7)
    return _save(fig, path)


def plot_eigenvalues(summary, path, truth=None):
    K = summary.real.mean.size
    k = np.arange(1, K + 1)
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    for ax, part, name, t in ((axes[0], summary.real, "Re mu_k", None if truth is None else truth.real),
                              (axes[1], summary.imag, "Im mu_k", None if truth is None else truth.imag)):
        ax.errorbar(k, part.mean, yerr=np.abs(part.ci95.T - part.mean), fmt="o", ms=3, capsize=2)
        if t is not None:
            ax.plot(k, t[:K], "kx", label="reference")
            ax.legend(fontsize=7)
        ax.set_xlabel("mode k")
        ax.set_ylabel(name)
    return _save(fig, path)


def plot_traces(chain, path, n_params: int = 4):
    K = chain.K
    idx = [i for j in range(min(n_params // 2, K)) for i in (j, K + j)]
    fig, axes = plt.subplots(len(idx), 1, figsize=(6, 1.6 * len(idx)), sharex=True, squeeze=False)
    step = max(1, chain.n_steps // 5000)
    steps = np.arange(0, chain.n_steps, step)
    for ax, i in zip(axes[:, 0], idx):
        ax.plot(steps, chain.samples[::step, i], lw=0.5)
        ax.axvline(chain.burn_in, color="k", ls="--", lw=0.8)
        ax.set_ylabel(chain.names[i], fontsize=8)
    axes[-1, 0].set_xlabel("step")
    return _save(fig, path)


def _color(value: float) -> str:
    # diverging blue-white-red, NaN as grey
    if not np.isfinite(value):
        return "#bbbbbb"
    v = float(np.clip(value, -1.0, 1.0))
    if v >= 0:
        r, g, b = 255, int(255 * (1 - v)), int(255 * (1 - v))
    else:
        r, g, b = int(255 * (1 + v)), int(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def correlation_svg(corr, path, cell: int = 18) -> str:
    """Plain SVG heatmap of a correlation matrix; deterministic text output."""
    m = corr.matrix
    n = m.shape[0]
    margin = 60
    size = margin + n * cell + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'font-family="sans-serif" font-size="9">']
    for i, name in enumerate(corr.names):
        y = margin + i * cell + cell * 0.7
        parts.append(f'<text x="{margin - 4}" y="{y:.1f}" text-anchor="end">{name}</text>')
        x = margin + i * cell + cell * 0.5
        parts.append(f'<text x="{x:.1f}" y="{margin - 4}" text-anchor="start" '
                     f'transform="rotate(-60 {x:.1f} {margin - 4})">{name}</text>')
    for i in range(n):
        for j in range(n):
            parts.append(f'<rect x="{margin + j * cell}" y="{margin + i * cell}" width="{cell}" '
                         f'height="{cell}" fill="{_color(m[i, j])}"><title>{corr.names[i]}, '
                         f'{corr.names[j]}: {m[i, j]:.3f}</title></rect>')
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text
