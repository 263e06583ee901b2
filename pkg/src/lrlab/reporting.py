"""Output artifacts: delimited files with reproducibility headers and
optional rendered figures.

Every file written here starts with ``#`` comment lines carrying the
exact invocation and seed, so a result can always be traced back to the
command that produced it.  The JSON readers in this package skip those
leading comment lines.
"""

from __future__ import annotations

import json


def header_lines(invocation: str, seed=None):
    lines = [f"invocation: {invocation}"]
    if seed is not None:
        lines.append(f"seed: {seed}")
    return lines


def write_csv(path, columns, rows, headers=()):
    """Rows are dicts keyed by ``columns``; floats get 17 significant digits."""

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    with open(path, "w", encoding="utf-8") as fh:
        for line in headers:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row.get(c)) for c in columns) + "\n")


def write_json(path, payload, headers=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in headers:
            fh.write(f"# {line}\n")
        json.dump(payload, fh, indent=2, default=_jsonify)
        fh.write("\n")


def _jsonify(obj):
    try:
        import numpy as np

        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
    except ImportError:
        pass
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        body = "".join(line for line in fh if not line.lstrip().startswith("#"))
    return json.loads(body)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_schedules(named_values, path, title="learning-rate schedules"):
    """Log-scale rate curves, one line per (name, values) pair."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, values in named_values:
        ax.plot(range(len(values)), values, label=name, lw=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration t")
    ax.set_ylabel("rate")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_compare(rows, path):
    """Exact loss per schedule family as a log-scale bar chart."""
    plt = _pyplot()
    names = [r["family"] for r in rows]
    totals = [r["exact_total"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(names, totals)
    ax.set_yscale("log")
    ax.set_ylabel("exact expected loss gap")
    ax.set_title("final-iterate loss by schedule family")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_trajectories(named_gaps, path, title="loss gap by epoch"):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, gaps in named_gaps:
        ax.plot(range(len(gaps)), gaps, marker="o", ms=2.5, lw=1.0, label=name)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss gap")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
