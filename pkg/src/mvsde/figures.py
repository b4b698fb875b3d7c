"""Figure rendering for the report paths.

Every report subcommand can drop PNG figures next to its CSV tables; the
delimited files stay the machine-readable contract and these are for eyes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return target


def moment_figure(moment: dict, path) -> Path:
    """Log-log increment table with its least-squares fit."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    table = moment.get("table", [])
    if table:
        hs = np.array([row["h"] for row in table])
        vals = np.array([row["estimate"] for row in table])
        ax.loglog(hs, vals, "o", label="estimate")
        if moment.get("slope") is not None:
            fit = np.exp(moment["intercept"]) * hs ** moment["slope"]
            ax.loglog(hs, fit, "-", label=f"fit, slope {moment['slope']:.3f}")
    ax.set_xlabel("increment span h")
    ax.set_ylabel(r"$\widehat{E}\,|\Delta|^4$")
    ax.set_title(f"fourth-moment increments, block {moment.get('block', '?')}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def ladder_figure(report: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.semilogy(range(len(report["distances"])), report["distances"], "o-")
    ax.set_xticks(range(len(report["distances"])))
    if report.get("reference") is not None:
        labels = [f"{lv} vs {report['reference']}" for lv in report["levels"]]
    else:
        lv = report["levels"]
        labels = [f"{lv[i]} vs {lv[i + 1]}" for i in range(len(lv) - 1)]
    ax.set_xticklabels(labels, rotation=20)
    ax.set_ylabel("sliced $W_1$ of terminal laws")
    ax.set_title(f"{report['axis']}-ladder: {report['verdict']}")
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def independence_figure(reports: list, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    stats = [r["statistic"] for r in reports]
    labels = [f"{r['f_id']}\n{r['g_id']}" for r in reports]
    colors = ["tab:blue" if r["passed"] else "tab:red" for r in reports]
    ax.bar(range(len(stats)), stats, color=colors)
    ax.axhline(3.0, color="k", linestyle="--", linewidth=1)
    ax.axhline(-3.0, color="k", linestyle="--", linewidth=1)
    ax.set_xticks(range(len(stats)))
    ax.set_xticklabels(labels, fontsize=6, rotation=45)
    ax.set_ylabel("studentized statistic")
    ax.set_title("increment-independence factorization")
    return _finish(fig, path)


def hypothesis_figure(report: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    conds = [c for c in report["conditions"] if c["margin"] is not None]
    names = [c["condition"] for c in conds]
    margins = [c["margin"] for c in conds]
    colors = ["tab:blue" if c["passed"] else "tab:red" for c in conds]
    ax.bar(names, margins, color=colors)
    ax.axhline(0.0, color="k", linewidth=1)
    ax.set_ylabel("worst margin")
    ax.set_title(f"hypothesis validation: {report['system']}")
    ax.tick_params(axis="x", rotation=15)
    return _finish(fig, path)
