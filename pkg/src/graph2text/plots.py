"""Figure rendering for experiment reports.

Each experiment command writes a PNG next to its CSV.  The Agg backend keeps
rendering headless; figures are a convenience view, the CSV stays the
machine-readable artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _grouped(rows, key_index):
    groups: dict = {}
    for row in rows:
        groups.setdefault(row[key_index], []).append(row)
    return groups


def render_sweep(rows, path) -> None:
    """BLEU against trainable-parameter count, one curve per variant."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, group in _grouped(rows, 0).items():
        group = sorted(group, key=lambda r: r[2])
        xs = [r[2] for r in group]
        ys = [r[5] for r in group]
        errs = [r[6] for r in group]
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=variant)
    ax.set_xscale("log")
    ax.set_xlabel("trainable parameters")
    ax.set_ylabel("dev BLEU")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_low_data(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for spec, group in _grouped(rows, 0).items():
        group = sorted(group, key=lambda r: r[1])
        xs = [r[1] for r in group]
        ys = [r[3] for r in group]
        errs = [r[4] for r in group]
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=spec)
    ax.set_xlabel("training examples")
    ax.set_ylabel("dev BLEU")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_robustness(rows, path) -> None:
    """Grouped bars: one group per linearization mode, one bar per spec."""
    fig, ax = plt.subplots(figsize=(6, 4))
    modes = list(dict.fromkeys(r[1] for r in rows))
    specs = list(dict.fromkeys(r[0] for r in rows))
    width = 0.8 / max(1, len(specs))
    for j, spec in enumerate(specs):
        values = [next(r[3] for r in rows if r[0] == spec and r[1] == mode)
                  for mode in modes]
        position = [i + j * width for i in range(len(modes))]
        ax.bar(position, values, width=width, label=spec)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(modes))])
    ax.set_xticklabels(modes)
    ax.set_ylabel("dev BLEU")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_ablation(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r[0] for r in rows]
    values = [r[4] for r in rows]
    errs = [r[5] for r in rows]
    ax.bar(range(len(names)), values, yerr=errs, capsize=3)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("dev BLEU")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_breakdown(report: dict, path) -> None:
    """Per-bucket BLEU bars for each run, one panel per graph property."""
    dims = list(report.keys())
    fig, axes = plt.subplots(1, len(dims), figsize=(4 * len(dims), 3.5), squeeze=False)
    for ax, dim in zip(axes[0], dims):
        buckets = report[dim]
        labels = list(buckets.keys())
        runs = list(next(iter(buckets.values()))["bleu"].keys()) if buckets else []
        width = 0.8 / max(1, len(runs))
        for j, run in enumerate(runs):
            values = [buckets[label]["bleu"][run] for label in labels]
            ax.bar([i + j * width for i in range(len(labels))], values,
                   width=width, label=run)
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
        ax.set_xticklabels(labels)
        ax.set_title(dim)
        ax.set_ylabel("BLEU")
    if dims:
        axes[0][0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
