"""CSV reports and their companion figures.

The CSV is the primary artifact: one header row, one row per
(parameter-combination, statistic), 17-significant-digit decimals, written
in a deterministic order so identical configurations produce bit-identical
bytes.  A figure with the estimates, their 99% bars, and the oracle marks
is rendered next to it for quick reading.
"""

from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import Experiment, Row
from .stats import z_critical

HEADER = ["experiment", "params", "n", "mean", "stderr", "oracle", "z", "verdict"]


def _num(v) -> str:
    if v is None:
        return ""
    f = float(v)
    if math.isnan(f):
        return "nan"
    return "%.17g" % f


def _params_text(params: dict) -> str:
    parts = []
    for k in sorted(params):
        v = params[k]
        parts.append(f"{k}={repr(float(v)) if isinstance(v, float) else v}")
    return ";".join(parts)


def write_csv(rows: list[Row], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in rows:
            w.writerow([
                r.experiment,
                _params_text(r.params),
                "" if r.n is None else str(int(r.n)),
                _num(r.mean),
                _num(r.stderr),
                _num(r.oracle),
                _num(r.z),
                r.verdict,
            ])


def summary_lines(rows: list[Row]) -> list[str]:
    out = []
    for r in rows:
        bits = [r.experiment, _params_text(r.params)]
        if r.n is not None:
            bits.append(f"n={int(r.n)}")
        if r.mean is not None:
            bits.append(f"mean={r.mean:.6g}")
        if r.stderr is not None:
            bits.append(f"stderr={r.stderr:.3g}")
        if r.oracle is not None:
            bits.append(f"oracle={r.oracle:.6g}")
        if r.z is not None:
            bits.append(f"z={r.z:.2f}")
        if r.verdict:
            bits.append(r.verdict.upper())
        out.append(" ".join(bits))
    return out


def render_figure(exp: Experiment, rows: list[Row], path: str) -> None:
    """Point-and-bar chart of every numeric row, grouped by statistic."""
    groups: dict[str, list[Row]] = {}
    for r in rows:
        if r.mean is None or not math.isfinite(r.mean):
            continue
        groups.setdefault(str(r.params.get("stat", "value")), []).append(r)
    if not groups:
        return
    ncols = len(groups)
    fig, axes = plt.subplots(1, ncols, figsize=(4.2 * ncols, 3.4), squeeze=False)
    zc = z_critical(0.99)
    for ax, (stat, rs) in zip(axes[0], groups.items()):
        sweep = exp.sweep if exp.sweep and all(exp.sweep in r.params for r in rs) else None
        if sweep:
            xs = [float(r.params[sweep]) for r in rs]
        else:
            xs = list(range(len(rs)))
        ys = [r.mean for r in rs]
        errs = [zc * r.stderr if r.stderr else 0.0 for r in rs]
        ax.errorbar(xs, ys, yerr=errs, fmt="o-", ms=4, capsize=3, label="estimate")
        oxs = [x for x, r in zip(xs, rs) if r.oracle is not None]
        oys = [r.oracle for r in rs if r.oracle is not None]
        if oxs:
            ax.plot(oxs, oys, "k_", ms=14, label="oracle")
        if exp.logx and sweep:
            ax.set_xscale("log")
        if exp.logy and all(y > 0 for y in ys):
            ax.set_yscale("log")
        ax.set_xlabel(sweep if sweep else "row")
        ax.set_title(stat, fontsize=9)
        ax.legend(fontsize=7)
    fig.suptitle(exp.name, fontsize=11)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
