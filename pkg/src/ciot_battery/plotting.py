"""Static SVG charts drawn from a sweep CSV and nothing else."""

from __future__ import annotations

import csv
import io
from collections import OrderedDict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

ENERGY_COLUMNS = ("e_sync_mj", "e_sr_mj", "e_cdrx_mj", "e_release_mj", "e_tau_mj", "e_sleep_mj")
ENERGY_NAMES = ("sync", "service request + data", "cDRX", "release", "TAU", "sleep")
RECIPES = ("lifetime_vs_payload", "lifetime_vs_cycle", "energy_breakdown", "device_comparison")
MAX_BARS = 24


def read_sweep_csv(text: str) -> list[dict[str, str]]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [r for r in rows if not r.get("error")]


def _group(rows, keys):
    groups: "OrderedDict[tuple, list[dict]]" = OrderedDict()
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    return groups


def _figure(title: str):
    fig = Figure(figsize=(7, 4.5))
    ax = fig.add_subplot()
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _line_chart(rows, x_col: str, series_keys, title: str, xlabel: str, logx: bool = False):
    fig, ax = _figure(title)
    for key, members in _group(rows, series_keys).items():
        pts = sorted((float(r[x_col]), float(r["lifetime_years"])) for r in members)
        if len(pts) < 2:
            continue
        label = " / ".join(f"{k.split('_')[0]}={v}" for k, v in zip(series_keys, key))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("battery lifetime (years)")
    if ax.lines:
        ax.legend(fontsize=7)
    return fig


def lifetime_vs_payload(rows):
    keys = ("device", "scenario", "cycle_hours", "t3412_hours")
    return _line_chart(rows, "payload_bytes", keys, "Lifetime vs payload", "payload (bytes)", logx=True)


def lifetime_vs_cycle(rows):
    keys = ("device", "scenario", "payload_bytes", "t3412_hours")
    return _line_chart(rows, "cycle_hours", keys, "Lifetime vs transmit cycle", "transmit cycle (hours)", logx=True)


def energy_breakdown(rows):
    fig, ax = _figure("Energy per transmit cycle")
    shown = rows[:MAX_BARS]
    labels = [f"{r['device']}/{r['scenario']}/{r['payload_bytes']}B/{r['cycle_hours']}h" for r in shown]
    bottom = [0.0] * len(shown)
    for col, name in zip(ENERGY_COLUMNS, ENERGY_NAMES):
        values = [float(r[col]) for r in shown]
        ax.bar(range(len(shown)), values, bottom=bottom, label=name)
        bottom = [b + v for b, v in zip(bottom, values)]
    ax.set_xticks(range(len(shown)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=6)
    ax.set_ylabel("energy (mJ)")
    ax.legend(fontsize=7)
    fig.subplots_adjust(bottom=0.3)
    return fig


def device_comparison(rows):
    fig, ax = _figure("Lifetime by device")
    point_keys = ("scenario", "payload_bytes", "cycle_hours", "t3412_hours")
    points = list(_group(rows, point_keys))
    index = {p: i for i, p in enumerate(points)}
    for device, members in _group(rows, ("device",)).items():
        xs = [index[tuple(r[k] for k in point_keys)] for r in members]
        ax.plot(xs, [float(r["lifetime_years"]) for r in members], marker="o", linestyle="", label=device[0])
    ax.set_xticks(range(len(points)))
    ax.set_xticklabels(["/".join(p) for p in points], rotation=60, ha="right", fontsize=6)
    ax.set_ylabel("battery lifetime (years)")
    if ax.lines:
        ax.legend(fontsize=7)
    fig.subplots_adjust(bottom=0.3)
    return fig


def render_all(csv_text: str, out_dir: str | Path) -> list[Path]:
    """Write one SVG per recipe; identical CSV gives identical files."""
    rows = read_sweep_csv(csv_text)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "ciot-battery", "svg.fonttype": "path"}):
        for name in RECIPES:
            fig = globals()[name](rows)
            path = out_dir / f"{name}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            written.append(path)
    return written
