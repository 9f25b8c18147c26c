"""Optional SVG line charts (matplotlib, Agg backend)."""
import os


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.savefig(path, format="svg")
    return path


def plot_toy(runs, out_dir):
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for run in runs:
        epochs = [r.epoch for r in run.rows]
        ax1.semilogy(epochs, [max(r.loss_gap, 1e-16) for r in run.rows], label=f"seed {run.seed}")
        ax2.semilogy(epochs, [max(r.stiefel_dist, 1e-18) for r in run.rows])
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("f(W) - f0")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("||W^T W - I||")
    ax1.legend()
    path = _save(fig, out_dir, "toy.svg")
    plt.close(fig)
    return path


def plot_decay(t, v, pred, out_dir):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(t, v, label="V")
    ax.semilogy(t, pred, "--", label="V(0) exp(-alpha t)")
    ax.set_xlabel("t")
    ax.legend()
    path = _save(fig, out_dir, "decay.svg")
    plt.close(fig)
    return path


def plot_mlp(results, out_dir):
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for tag, run in results.items():
        epochs = [r.epoch for r in run.rows]
        ax1.semilogy(epochs, [r.loss for r in run.rows], label=tag)
        ax2.semilogy(epochs, [max(r.stiefel_dist, 1e-18) for r in run.rows], label=tag)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("training loss")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("||W1^T W1 - I||")
    ax2.legend()
    path = _save(fig, out_dir, "mlp.svg")
    plt.close(fig)
    return path
