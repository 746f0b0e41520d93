"""Render dormancy-lab output files into figures.

A post-processing pipeline over the documented CSV/JSON contracts only; it
never imports the simulation package. Plot kinds:

  regime-map        regimes.csv (+ legend.json next to it or via --legend)
  trajectory        ode_trajectory.csv / ssa_trajectory.csv, all components
  trajectory-zoom   same, y-axis clipped to the small coordinates
  invasion-timing   replicas.csv, histogram of T_beta / log K per K

Rendering is deterministic for fixed inputs and library versions (pinned in
pinned-requirements.txt).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# legend.json color names -> matplotlib colors
COLOR_ALIASES = {
    "dark green": "darkgreen",
    "light green": "lightgreen",
    "gray": "0.7",
    "black": "black",
}

FIGSIZE = (7.0, 5.0)
DPI = 150


class RenderError(Exception):
    pass


@dataclass
class PlotJob:
    kind: str                      # regime-map | trajectory | trajectory-zoom | invasion-timing
    inputs: list
    output: str
    legend_path: str = None        # regime-map only; defaults to legend.json beside the CSV
    zoom_max: float = 1.0          # trajectory-zoom y ceiling
    title: str = ""


@dataclass
class RenderInfo:
    """Summary metadata for smoke tests: what was drawn and the axis ranges."""

    output: str
    kind: str
    categories: list = field(default_factory=list)
    series_labels: list = field(default_factory=list)
    x_range: tuple = (math.nan, math.nan)
    y_range: tuple = (math.nan, math.nan)


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise RenderError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RenderError(f"{path}: empty file")
        rows = []
        for idx, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise RenderError(f"{path}: row {idx}: expected {len(header)} fields, got {len(row)}")
            rows.append(row)
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return header, rows


def _floats(path, rows, cols, header):
    out = np.empty((len(rows), len(cols)))
    for i, row in enumerate(rows):
        for j, col in enumerate(cols):
            cell = row[header.index(col)]
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise RenderError(f"{path}: row {i + 2}: bad number {cell!r} in column {col}")
    return out


def render_regime_map(job: PlotJob) -> RenderInfo:
    csv_path = Path(job.inputs[0])
    header, rows = _read_csv(csv_path)
    for col in ("lambda2", "q", "regime"):
        if col not in header:
            raise RenderError(f"{csv_path}: missing column {col}")
    legend_path = Path(job.legend_path) if job.legend_path else csv_path.parent / "legend.json"
    if not legend_path.exists():
        raise RenderError(f"legend file not found: {legend_path}")
    legend = json.loads(legend_path.read_text())

    xy = _floats(csv_path, rows, ["lambda2", "q"], header)
    regimes = [row[header.index("regime")] for row in rows]
    lam = np.unique(xy[:, 0])
    qs = np.unique(xy[:, 1])
    if len(lam) * len(qs) != len(rows):
        raise RenderError(f"{csv_path}: rows do not tile a full lambda2 x q grid")
    categories = sorted(set(regimes))
    for cat in categories:
        if cat not in legend:
            raise RenderError(f"regime {cat!r} missing from {legend_path}")
    index = {cat: k for k, cat in enumerate(categories)}
    grid = np.empty((len(qs), len(lam)), dtype=int)
    li = {v: k for k, v in enumerate(lam)}
    qi = {v: k for k, v in enumerate(qs)}
    for (l2, q), reg in zip(xy, regimes):
        grid[qi[q], li[l2]] = index[reg]

    from matplotlib.colors import ListedColormap

    colors = [COLOR_ALIASES.get(legend[cat], legend[cat]) for cat in categories]
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.imshow(grid, origin="lower", aspect="auto", cmap=ListedColormap(colors),
              extent=(lam.min(), lam.max(), qs.min(), qs.max()),
              interpolation="nearest", vmin=-0.5, vmax=len(categories) - 0.5)
    ax.set_xlabel("lambda2")
    ax.set_ylabel("q")
    ax.set_title(job.title or "invasion outcome regimes")
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in colors]
    ax.legend(handles, categories, loc="center left", bbox_to_anchor=(1.01, 0.5),
              fontsize=8, frameon=False)
    fig.savefig(job.output, bbox_inches="tight")
    plt.close(fig)
    return RenderInfo(output=str(job.output), kind=job.kind, categories=categories,
                      x_range=(float(lam.min()), float(lam.max())),
                      y_range=(float(qs.min()), float(qs.max())))


def render_trajectory(job: PlotJob, zoom: bool = False) -> RenderInfo:
    csv_path = Path(job.inputs[0])
    header, rows = _read_csv(csv_path)
    if header[0] != "time":
        raise RenderError(f"{csv_path}: first column must be 'time', got {header[0]!r}")
    labels = header[1:]
    data = _floats(csv_path, rows, header, header)
    t = data[:, 0]
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    for j, lab in enumerate(labels):
        ax.plot(t, data[:, j + 1], label=lab, linewidth=1.2)
    ax.set_xlabel("time")
    ax.set_ylabel("rescaled abundance" if np.max(data[:, 1:]) < 1e3 else "count")
    y_max = float(np.max(data[:, 1:]))
    if zoom:
        ax.set_ylim(0.0, job.zoom_max)
        y_max = job.zoom_max
    ax.set_xlim(float(t.min()), float(t.max()))
    ax.legend(loc="upper right", fontsize=8, ncol=2, frameon=False)
    ax.set_title(job.title or ("trajectory (zoom)" if zoom else "trajectory"))
    fig.savefig(job.output, bbox_inches="tight")
    plt.close(fig)
    return RenderInfo(output=str(job.output), kind=job.kind, series_labels=labels,
                      x_range=(float(t.min()), float(t.max())),
                      y_range=(0.0, y_max))


def render_invasion_timing(job: PlotJob) -> RenderInfo:
    csv_path = Path(job.inputs[0])
    header, rows = _read_csv(csv_path)
    for col in ("K", "outcome", "T_beta"):
        if col not in header:
            raise RenderError(f"{csv_path}: missing column {col}")
    per_K = {}
    for idx, row in enumerate(rows, start=2):
        if row[header.index("outcome")] != "success":
            continue
        try:
            K = float(row[header.index("K")])
            tb = float(row[header.index("T_beta")])
        except ValueError:
            raise RenderError(f"{csv_path}: row {idx}: bad numeric field")
        per_K.setdefault(K, []).append(tb / math.log(K))
    if not per_K:
        raise RenderError(f"{csv_path}: no successful replicas to plot")
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    values = []
    for K in sorted(per_K):
        vals = np.asarray(per_K[K])
        values.append(vals)
        ax.hist(vals, bins=30, alpha=0.55, label=f"K={K:g} (median {np.median(vals):.2f})")
    ax.set_xlabel("T_beta / log K")
    ax.set_ylabel("successful replicas")
    ax.legend(fontsize=8, frameon=False)
    ax.set_title(job.title or "time to macroscopic invasion")
    fig.savefig(job.output, bbox_inches="tight")
    plt.close(fig)
    allv = np.concatenate(values)
    return RenderInfo(output=str(job.output), kind=job.kind,
                      categories=[f"K={K:g}" for K in sorted(per_K)],
                      x_range=(float(allv.min()), float(allv.max())),
                      y_range=(0.0, float(len(allv))))


def render(job: PlotJob) -> RenderInfo:
    out = Path(job.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if job.kind == "regime-map":
        return render_regime_map(job)
    if job.kind == "trajectory":
        return render_trajectory(job, zoom=False)
    if job.kind == "trajectory-zoom":
        return render_trajectory(job, zoom=True)
    if job.kind == "invasion-timing":
        return render_invasion_timing(job)
    raise RenderError(f"unknown plot kind {job.kind!r}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dormancy-figures",
                                 description="render dormancy-lab outputs to images")
    ap.add_argument("--kind", required=True,
                    choices=("regime-map", "trajectory", "trajectory-zoom", "invasion-timing"))
    ap.add_argument("--input", required=True, action="append",
                    help="input CSV (repeatable; first is primary)")
    ap.add_argument("--output", required=True, help="output image path")
    ap.add_argument("--legend", help="legend.json for regime maps (default: beside the CSV)")
    ap.add_argument("--zoom-max", type=float, default=1.0, dest="zoom_max")
    ap.add_argument("--title", default="")
    args = ap.parse_args(argv)
    job = PlotJob(kind=args.kind, inputs=args.input, output=args.output,
                  legend_path=args.legend, zoom_max=args.zoom_max, title=args.title)
    try:
        info = render(job)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {info.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
