"""Matplotlib renderings saved next to the delimited outputs.

Every CLI command that emits a CSV can also render the matching figure;
all functions take data already in memory and write a PNG, returning the
path.  Rendering is optional everywhere (--no-figures) and nothing else
depends on it.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_dataset(ds, path, k=None):
    """Histograms of the sampled states and targets."""
    fields = [("eps_t", "strain"), ("zeta_t", "plastic strain"),
              ("sigma_t", "stress [Pa]"), ("d_eps", "strain increment"),
              ("f_next", "stored energy [J/m^3]"), ("d_next", "dissipation [W/m^3]")]
    fig, axes = plt.subplots(2, 3, figsize=(10, 6))
    for ax, (name, label) in zip(axes.ravel(), fields):
        data = getattr(ds, name)
        ax.hist(np.asarray(data).ravel(), bins=60, color="steelblue")
        ax.set_xlabel(label)
        ax.set_ylabel("count")
    fig.suptitle(f"{len(ds)} samples, {100 * ds.on_yield_fraction:.1f}% on the yield surface")
    return _save(fig, path)


def plot_history(history, path, title=""):
    """Per-term train/validation loss curves over epochs."""
    terms = sorted({t for _, _, t, _ in history.rows})
    fig, axes = plt.subplots(1, len(terms), figsize=(3.2 * len(terms), 3.2), squeeze=False)
    for ax, term in zip(axes[0], terms):
        for split, style in (("train", "-"), ("val", "--")):
            series = history.series(split, term)
            if series.size:
                ax.semilogy(np.arange(1, series.size + 1), series, style, label=split)
        ax.set_xlabel("epoch")
        ax.set_title(term)
        ax.legend()
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_trajectory(traj, path, reference=None, title=""):
    """Stress-strain loop plus plastic strain, energy, and dissipation."""
    dim = traj.eps.shape[1]
    fig, axes = plt.subplots(1, 4, figsize=(13, 3.2))
    steps = np.arange(len(traj))
    for i in range(dim):
        label = traj.kind if dim == 1 else f"{traj.kind} comp {i + 1}"
        axes[0].plot(traj.eps[:, i], traj.sigma[:, i], label=label)
        axes[1].plot(traj.eps[:, i], traj.zeta[:, i])
        if reference is not None:
            axes[0].plot(reference.eps[:, i], reference.sigma[:, i], "k--", lw=0.8,
                         label="reference" if i == 0 else None)
            axes[1].plot(reference.eps[:, i], reference.zeta[:, i], "k--", lw=0.8)
    axes[2].plot(steps, traj.f, label=traj.kind)
    axes[3].plot(steps, traj.d, label=traj.kind)
    if reference is not None:
        axes[2].plot(np.arange(len(reference)), reference.f, "k--", lw=0.8, label="reference")
        axes[3].plot(np.arange(len(reference)), reference.d, "k--", lw=0.8)
    axes[3].axhline(0.0, color="gray", lw=0.6)
    for ax, ylab in zip(axes, ("stress [Pa]", "plastic strain", "F [J/m^3]", "D [W/m^3]")):
        ax.set_ylabel(ylab)
    axes[0].set_xlabel("strain")
    axes[1].set_xlabel("strain")
    axes[2].set_xlabel("step")
    axes[3].set_xlabel("step")
    axes[0].legend(fontsize=7)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_study(rows, path):
    """Bar chart of the activation benchmark (log scale)."""
    names = [r.activation for r in rows]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(1.1 * len(names) + 2, 3.5))
    ax.bar(x - 0.2, [r.loss_output for r in rows], width=0.4, label="value MAE")
    ax.bar(x + 0.2, [r.loss_gradient for r in rows], width=0.4, label="gradient MAE")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("test MAE")
    ax.legend()
    return _save(fig, path)


def plot_sweep(rows, path, k=None):
    """Generalization sweep: RMSE and minimum dissipation per increment."""
    kinds = sorted({r["model_kind"] for r in rows})
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    for kind in kinds:
        sel = [r for r in rows if r["model_kind"] == kind]
        d_eps = [r["d_eps"] for r in sel]
        axes[0].loglog(d_eps, [r["stress_rmse"] for r in sel], "o-", label=kind)
        axes[1].loglog(d_eps, [max(r["zeta_rmse"], 1e-300) for r in sel], "o-", label=kind)
        axes[2].semilogx(d_eps, [r["min_d"] for r in sel], "o-", label=kind)
    if k is not None:
        axes[0].axhline(k, color="gray", lw=0.6, label="yield strength")
    axes[2].axhline(0.0, color="gray", lw=0.6)
    for ax, ylab in zip(axes, ("stress RMSE [Pa]", "plastic strain RMSE", "min D [W/m^3]")):
        ax.set_xlabel("strain increment")
        ax.set_ylabel(ylab)
        ax.legend(fontsize=7)
    axes[2].set_yscale("symlog")
    return _save(fig, path)
