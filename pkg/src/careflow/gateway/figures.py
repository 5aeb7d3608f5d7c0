"""Figure rendering for scenario reports.

Two kinds of output land next to the delimited trace files: a per-patient
execution timeline (task transitions over virtual time, one row per task,
colored by the state entered) and a cross-patient summary of delivered
recommendations by kind.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .environment import Environment

_STATE_COLORS = {
    "in_progress": "#1f77b4",
    "completed": "#2ca02c",
    "discarded": "#d62728",
}

_KIND_COLORS = {
    "tip": "#2ca02c",
    "reminder": "#1f77b4",
    "alert": "#d62728",
    "capsule": "#9467bd",
    "proposal": "#ff7f0e",
}


def render_patient_timeline(env: Environment, patient_id: str, path: Path) -> bool:
    """Scatter of task transitions over virtual time; False when no trace."""
    rows: list[str] = []
    points: dict[str, list[tuple[int, int]]] = {s: [] for s in _STATE_COLORS}
    for instance_id in env.platform.instances_for_patient(patient_id):
        for record in env.platform.get_trace(instance_id):
            label = f"{record['instance_id']}:{record['task']}"
            if label not in rows:
                rows.append(label)
            state = record["to"]
            if state in points:
                points[state].append((record["at"], rows.index(label)))
    if not rows:
        return False
    height = max(2.5, 0.22 * len(rows) + 1.2)
    fig, ax = plt.subplots(figsize=(10, height))
    for state, coords in points.items():
        if coords:
            ax.scatter(
                [c[0] for c in coords],
                [c[1] for c in coords],
                s=18,
                color=_STATE_COLORS[state],
                label=state,
            )
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(rows, fontsize=5)
    ax.invert_yaxis()
    ax.set_xlabel("virtual time (s)")
    ax.set_title(f"task transitions: {patient_id}")
    ax.legend(loc="upper right", fontsize=7)
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return True


def render_summary(env: Environment, patient_ids: list[str], path: Path) -> None:
    """Stacked bars of recommendation kinds per patient."""
    kinds = list(_KIND_COLORS)
    counts = {kind: [] for kind in kinds}
    for patient_id in patient_ids:
        views = env.list_recommendations(patient_id)
        for kind in kinds:
            counts[kind].append(sum(1 for v in views if v.get("kind") == kind))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(patient_ids) + 2), 4))
    bottom = [0] * len(patient_ids)
    for kind in kinds:
        ax.bar(
            patient_ids,
            counts[kind],
            bottom=bottom,
            color=_KIND_COLORS[kind],
            label=kind,
        )
        bottom = [b + c for b, c in zip(bottom, counts[kind])]
    ax.set_ylabel("recommendations")
    ax.set_title("recommendations by kind")
    ax.legend(fontsize=7)
    if len(patient_ids) > 8:
        ax.tick_params(axis="x", labelrotation=90, labelsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_report_figures(
    env: Environment, patient_ids: list[str], figures_dir: Path
) -> list[Path]:
    figures_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for patient_id in patient_ids:
        path = figures_dir / f"timeline_{patient_id}.png"
        if render_patient_timeline(env, patient_id, path):
            paths.append(path)
    summary = figures_dir / "recommendations.png"
    render_summary(env, patient_ids, summary)
    paths.append(summary)
    return paths
