"""Figure rendering for the report path.

Evaluation and deadline runs that write delimited output also render the
matching figures next to it: load and delay against the sweep axis, or
the deadline-miss complement CDF on a log scale.  Rendering is headless
(Agg) and purely cosmetic; the delimited files remain the data of record.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SCHEME_STYLE = {
    "uncoded": dict(color="tab:gray", marker="d"),
    "cmr": dict(color="tab:green", marker="s"),
    "sc": dict(color="tab:purple", marker="*"),
    "unified": dict(color="black", marker="x"),
    "lt": dict(color="tab:blue", marker="v"),
    "bdc_lt": dict(color="tab:cyan", marker="^"),
}


def _style(label: str) -> dict:
    base = label.split("(")[0]
    return SCHEME_STYLE.get(base, dict(color="tab:red", marker="o"))


def render_sweep(rows: list[dict], axis: str | None, path: str | Path) -> Path:
    """Two-panel load/delay figure for an evaluation table."""
    path = Path(path)
    fig, (ax_l, ax_d) = plt.subplots(1, 2, figsize=(9, 3.8))
    by_scheme: dict[str, list[dict]] = {}
    for row in rows:
        by_scheme.setdefault(row["scheme"], []).append(row)
    for scheme, entries in by_scheme.items():
        xs = [e["sweep_value"] if axis else 0 for e in entries]
        ax_l.plot(xs, [e["L"] for e in entries], label=scheme,
                  linewidth=1.5, markersize=5, **_style(scheme))
        ax_d.plot(xs, [e["D"] for e in entries], label=scheme,
                  linewidth=1.5, markersize=5, **_style(scheme))
    xlabel = axis or "point"
    for ax, ylabel in ((ax_l, "communication load"), (ax_d, "computational delay")):
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
    if axis == "T":
        ax_l.set_xscale("log")
        ax_d.set_xscale("log")
    ax_l.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_deadline(rows: list[dict], path: str | Path) -> Path:
    """Miss probability against the deadline, log vertical scale."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    by_scheme: dict[str, list[dict]] = {}
    for row in rows:
        by_scheme.setdefault(row["scheme"], []).append(row)
    for scheme, entries in by_scheme.items():
        entries = sorted(entries, key=lambda e: e["t"])
        ts = [e["t"] for e in entries]
        ps = [max(e["miss_probability"], 0.5 / e["trials"]) for e in entries]
        lo = [max(e["ci_low"], 0.25 / e["trials"]) for e in entries]
        hi = [max(e["ci_high"], 0.5 / e["trials"]) for e in entries]
        ax.plot(ts, ps, label=scheme, linewidth=1.5, markersize=5, **_style(scheme))
        ax.fill_between(ts, lo, hi, alpha=0.2, color=_style(scheme)["color"])
    ax.set_yscale("log")
    ax.set_xlabel("deadline t")
    ax.set_ylabel("P(delay > t)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
