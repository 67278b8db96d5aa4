"""Figures for audit and probe output (rendered off-screen to files)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .verify import ProbeRecord  # noqa: E402


def census_figure(audits: Sequence[dict], path: str | Path) -> Path:
    """Compliant-lasso counts before and after each enforcement run."""
    rows = [a for a in audits if "compliant_before" in a]
    labels = [f"{a['norm']}\n{a['mode']}" for a in rows]
    before = [a["compliant_before"] for a in rows]
    after = [a["compliant_after"] for a in rows]
    fig, ax = plt.subplots(figsize=(max(4, 1.4 * len(rows)), 3.5))
    xs = range(len(rows))
    ax.bar([x - 0.2 for x in xs], before, width=0.4, label="before")
    ax.bar([x + 0.2 for x in xs], after, width=0.4, label="after")
    ax.set_xticks(list(xs), labels, fontsize=8)
    if rows:
        ax.set_ylabel(f"compliant lassos (length <= {rows[0]['max_len']})")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def scaling_figure(records: Sequence[ProbeRecord], x: str, path: str | Path, title: str = "") -> Path:
    """Explored configurations and their bound against ``x`` on log-log axes."""
    xs = [getattr(r, x) for r in records]
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(xs, [r.configs_explored for r in records], "o-", label="explored")
    ax.loglog(xs, [r.config_bound for r in records], "--", label="bound")
    ax.set_xlabel(x.replace("_", " "))
    ax.set_ylabel("configurations")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
