"""Figure rendering for run, sweep and message-volume outputs.

Uses the Agg backend so figures render to files on headless boxes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from . import ricbus  # noqa: E402
from .engine import RunResult, SweepRow  # noqa: E402


def _finish(fig, path: str | Path, dpi: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def render_timeseries(result: RunResult, path: str | Path, dpi: int = 130) -> Path:
    s = result.series
    hours = s.t_s / 3600.0
    fig, axes = plt.subplots(4, 1, figsize=(10, 11), sharex=True)

    ax = axes[0]
    ax.plot(hours, s.beta_sys_pct, lw=0.4, color="tab:red", alpha=0.35)
    ax.plot(hours, _smooth(s.beta_sys_pct, 300), lw=1.4, color="tab:red",
            label="outage (5 min mean)")
    lo = result.config.policy.target_outage_lo
    hi = result.config.policy.target_outage_hi
    ax.axhspan(lo, hi, color="tab:green", alpha=0.15, label="target band")
    ax.set_ylabel("outage [%]")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[1]
    ax.step(hours, s.alpha_off, where="post", label="switch-off threshold")
    ax.step(hours, s.alpha_on, where="post", label="switch-on threshold")
    ax.set_ylabel("threshold [% load]")
    ax.set_ylim(-2, 102)
    ax.legend(loc="center right", fontsize=8)

    ax = axes[2]
    ax.step(hours, s.n_off, where="post", color="tab:purple")
    ax.set_ylabel("cells off")

    ax = axes[3]
    ax.plot(hours, s.power_w / 1e3, lw=0.8, color="tab:orange", label="power [kW]")
    ax.set_ylabel("power [kW]")
    ax2 = ax.twinx()
    ax2.plot(hours, s.n_ues, lw=0.6, color="tab:blue", alpha=0.6, label="users")
    ax2.set_ylabel("users")
    ax.set_xlabel("time [h]")

    fig.tight_layout()
    return _finish(fig, path, dpi)


def _smooth(x, w: int):
    import numpy as np
    if len(x) < w:
        return x
    kernel = np.ones(w) / w
    return np.convolve(x, kernel, mode="same")


def render_sweep(rows: list[SweepRow], path: str | Path, dpi: int = 130) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    tandem = [r for r in rows if r.label == "tandem"]
    if tandem:
        ax.plot([r.outage_pct for r in tandem], [r.power_w / 1e3 for r in tandem],
                "o-", color="tab:blue", label="closed loop")
        for r in tandem:
            ax.annotate(f"{r.goal_pct:g}%", (r.outage_pct, r.power_w / 1e3),
                        textcoords="offset points", xytext=(6, 4), fontsize=8)
    marks = {"all_active": ("s", "tab:green", "all cells on"),
             "all_capacity_off": ("^", "tab:red", "capacity layer off")}
    for r in rows:
        if r.label in marks:
            m, c, lab = marks[r.label]
            ax.plot([r.outage_pct], [r.power_w / 1e3], m, color=c, ms=9, label=lab)
    ax.set_xlabel("mean outage [%]")
    ax.set_ylabel("mean power [kW]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=9)
    fig.tight_layout()
    return _finish(fig, path, dpi)


def message_stats(records) -> dict[tuple[str, str], int]:
    """Aggregate message counts by (interface, kind) from an iterable of
    log dicts or LogRecord objects."""
    out: dict[tuple[str, str], int] = {}
    for r in records:
        if isinstance(r, dict):
            key = (r["interface"], r["kind"])
            n = int(r.get("count", 1))
        else:
            key = (r.interface, r.kind)
            n = int(r.count)
        out[key] = out.get(key, 0) + n
    return out


def render_msgstats(stats: dict[tuple[str, str], int], path: str | Path,
                    dpi: int = 130) -> Path:
    order = [(i, k) for i in (ricbus.E2, ricbus.A1, ricbus.O1)
             for k in sorted({kk for ii, kk in stats if ii == i})]
    labels = [f"{i}:{k}" for i, k in order]
    values = [stats[key] for key in order]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    colors = {ricbus.E2: "tab:blue", ricbus.A1: "tab:orange", ricbus.O1: "tab:green"}
    ax.bar(range(len(order)), values,
           color=[colors[i] for i, _ in order])
    ax.set_xticks(range(len(order)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("messages (log scale)")
    for x, v in enumerate(values):
        ax.text(x, v, f"{v:,}", ha="center", va="bottom", fontsize=7)
    fig.tight_layout()
    return _finish(fig, path, dpi)
