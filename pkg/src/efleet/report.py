"""Figure rendering from benchmark CSV exports.

The CSV is the canonical artifact; these figures are a convenience layer on
top of it (mean reward, win ratio, and a time-decomposition breakdown).
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

TIME_FIELDS = ("routing_time_h", "charging_time_h", "waiting_time_h", "unloading_time_h")


def load_rows(csv_path: str) -> list[dict]:
    with open(csv_path, newline="", encoding="utf-8") as f:
        return [dict(row) for row in csv.DictReader(f)]


def _by_policy(rows: list[dict]) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = defaultdict(list)
    for row in rows:
        grouped[row["policy"]].append(row)
    return grouped


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def render_figures(csv_path: str, out_dir: str) -> list[str]:
    """Render the standard figures; returns the written file paths."""
    rows = load_rows(csv_path)
    if not rows:
        raise ValueError(f"no data rows in {csv_path}")
    grouped = _by_policy(rows)
    policies = sorted(grouped)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    fig, ax = plt.subplots(figsize=(6, 4))
    means = [_mean(float(r["reward_total"]) for r in grouped[p]) for p in policies]
    ax.bar(policies, means, color="tab:blue")
    ax.set_ylabel("mean episode reward")
    ax.set_title("Mean reward by policy")
    fig.tight_layout()
    path = out / "mean_reward.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(str(path))

    # win ratio: strict best reward per scenario; ties award nothing
    by_scenario: dict[str, dict[str, float]] = defaultdict(dict)
    for row in rows:
        by_scenario[row["scenario_id"]][row["policy"]] = float(row["reward_total"])
    wins = {p: 0 for p in policies}
    for rewards in by_scenario.values():
        best = max(rewards.values())
        leaders = [p for p, v in rewards.items() if v == best]
        if len(leaders) == 1:
            wins[leaders[0]] += 1
    n = max(1, len(by_scenario))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(policies, [100.0 * wins[p] / n for p in policies], color="tab:green")
    ax.set_ylabel("win ratio (%)")
    ax.set_title("Strict-best win ratio")
    fig.tight_layout()
    path = out / "win_ratio.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(str(path))

    fig, ax = plt.subplots(figsize=(6, 4))
    bottom = [0.0] * len(policies)
    for fieldname in TIME_FIELDS:
        vals = [_mean(float(r[fieldname]) for r in grouped[p]) for p in policies]
        ax.bar(policies, vals, bottom=bottom, label=fieldname.removesuffix("_h"))
        bottom = [b + v for b, v in zip(bottom, vals)]
    ax.set_ylabel("mean hours per episode")
    ax.set_title("Time decomposition by policy")
    ax.legend()
    fig.tight_layout()
    path = out / "time_decomposition.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(str(path))

    return written
