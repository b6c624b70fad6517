"""Stacked-bar PNG figures of the self-consumption decomposition."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .report import OPTIMIZERS, ReportBundle, SelfConsumption  # noqa: E402

COLOURS = {
    "direct_own_pv": "#f2b134",
    "direct_neighbour_pv": "#e8743b",
    "own_stored_pv": "#3f7fbf",
    "neighbour_stored_pv": "#6bb3a0",
}
LABELS = {
    "direct_own_pv": "direct own PV",
    "direct_neighbour_pv": "direct neighbour PV",
    "own_stored_pv": "own stored PV",
    "neighbour_stored_pv": "neighbour stored PV",
}
# Fixed metadata keeps repeated renders byte-identical.
_PNG_METADATA = {"Software": None}


def plot_scenario(bundle: ReportBundle, scenario_id: str, path) -> Path:
    """One bar per optimizer, stacked by local PV channel, in % of load."""
    s = bundle.scenario(scenario_id)
    names = [n for n in OPTIMIZERS if n in s.optimizers]
    fig, ax = plt.subplots(figsize=(6.0, 4.6), dpi=100)
    bottoms = [0.0] * len(names)
    for comp in SelfConsumption.COMPONENTS:
        heights = [s.optimizers[n].self_consumption[comp] for n in names]
        ax.bar([n.replace("_", " ") for n in names], heights, bottom=bottoms,
               color=COLOURS[comp], label=LABELS[comp], width=0.6)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax.set_ylim(0, max(100.0, 1.05 * max(bottoms, default=0.0)))
    ax.set_ylabel(f"local PV consumption [% of {bundle.percent_base}]")
    ax.set_title(f"Scenario {scenario_id}")
    ax.legend(loc="upper center", bbox_to_anchor=(0.5, -0.1), ncol=2, fontsize=8, frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="png", metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_all(bundle: ReportBundle, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [plot_scenario(bundle, s.scenario_id, out_dir / f"plot_{s.scenario_id}.png")
            for s in bundle.scenarios]
