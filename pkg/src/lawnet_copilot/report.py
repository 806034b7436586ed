"""Figure rendering for experiment outputs.

Companion to the CSV exports: reads the metrics table (or results in
memory) and writes PNG figures next to the delimited files. Headless-safe
(Agg backend); nothing here feeds back into the simulation.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import MetricsResult  # noqa: E402

_SCHEME_ORDER = ["intent_weighted_pf", "copilot", "round_robin", "max_sinr"]


def _scheme_sort_key(name: str) -> tuple:
    try:
        return (0, _SCHEME_ORDER.index(name))
    except ValueError:
        return (1, name)


def read_metrics_csv(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def render_figures(rows: list[dict], out_dir: str | Path) -> list[Path]:
    """ISR / EE / latency comparison figures from metrics rows."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_scheme: dict[str, list[dict]] = defaultdict(list)
    for row in rows:
        by_scheme[row["scheme"]].append(row)
    schemes = sorted(by_scheme, key=_scheme_sort_key)
    written: list[Path] = []

    def grouped(field: str) -> list[list[float]]:
        return [
            [float(r[field]) for r in by_scheme[s] if r.get(field) not in (None, "")]
            for s in schemes
        ]

    # ISR per scheme, one point per seed
    fig, ax = plt.subplots(figsize=(6, 4))
    data = grouped("isr")
    ax.boxplot(data, tick_labels=schemes)
    for i, vals in enumerate(data):
        ax.plot([i + 1] * len(vals), vals, "k.", alpha=0.5, markersize=4)
    ax.set_ylabel("intent satisfaction rate")
    ax.set_ylim(0, 1.05)
    ax.set_title("ISR by scheduling scheme")
    ax.grid(axis="y", alpha=0.4)
    fig.tight_layout()
    p = out / "isr_by_scheme.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    written.append(p)

    # energy efficiency
    fig, ax = plt.subplots(figsize=(6, 4))
    data = grouped("ee_mbit_per_joule")
    ax.boxplot(data, tick_labels=schemes)
    ax.set_ylabel("energy efficiency (Mbit/J)")
    ax.set_title("Delivered bits per joule")
    ax.grid(axis="y", alpha=0.4)
    fig.tight_layout()
    p = out / "ee_by_scheme.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    written.append(p)

    # latency per class (mean over seeds), grouped bars
    latency_fields = sorted(
        {
            k
            for rows_ in by_scheme.values()
            for r in rows_
            for k in r
            if k.startswith("latency_mean_s_")
        }
    )
    if latency_fields:
        fig, ax = plt.subplots(figsize=(7, 4))
        width = 0.8 / max(1, len(schemes))
        for si, s in enumerate(schemes):
            means = []
            for f in latency_fields:
                vals = [float(r[f]) for r in by_scheme[s] if r.get(f) not in (None, "")]
                means.append(1e3 * sum(vals) / len(vals) if vals else 0.0)
            xs = [i + si * width for i in range(len(latency_fields))]
            ax.bar(xs, means, width=width, label=s)
        ax.set_xticks(
            [i + 0.4 - width / 2 for i in range(len(latency_fields))],
            [f.replace("latency_mean_s_", "") for f in latency_fields],
        )
        ax.set_ylabel("mean latency (ms)")
        ax.set_yscale("log")
        ax.set_title("Per-class latency")
        ax.legend(fontsize=8)
        ax.grid(axis="y", alpha=0.4)
        fig.tight_layout()
        p = out / "latency_by_class.png"
        fig.savefig(p, dpi=130)
        plt.close(fig)
        written.append(p)
    return written


def render_from_results(results: list[MetricsResult], out_dir: str | Path) -> list[Path]:
    rows = [
        {k: ("" if v is None else v) for k, v in r.to_row().items()} for r in results
    ]
    return render_figures(rows, out_dir)
