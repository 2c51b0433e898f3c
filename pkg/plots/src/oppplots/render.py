"""Render benchmark figure panels from the results CSV.

The input is the simulator's documented CSV schema (per-run rows plus one
aggregate row per protocol/TTL cell). Panels a-f cover delivery ratio,
average cost, average delay, delivered messages, forwardings and total
transfers; 95% confidence half-widths become error bars wherever the CSV
carries them, including zero-height bars when the half-width is 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

REQUIRED_COLUMNS = ("experiment", "protocol", "ttl_hours", "seed", "created",
                    "delivered", "forwardings", "delivery_rate", "cost",
                    "mean_delay_s", "ci_delivery", "ci_cost", "ci_delay")

PANELS = {
    "a": ("delivery_rate", "ci_delivery", "delivery success ratio"),
    "b": ("cost", "ci_cost", "average cost (replicas per delivered message)"),
    "c": ("mean_delay_s", "ci_delay", "average delay (s)"),
    "d": ("delivered", None, "delivered messages (mean per run)"),
    "e": ("forwardings", None, "forwardings (mean per run)"),
    "f": ("forwardings", None, "total transfers (mean per run)"),
}


class SchemaError(Exception):
    """The CSV does not match the documented results schema."""


@dataclass(frozen=True)
class Cell:
    protocol: str
    ttl_hours: float
    values: dict  # column -> float | None


def _parse_float(cell: str):
    return float(cell) if cell not in ("", None) else None


def load_aggregates(text: str) -> list[Cell]:
    """Aggregate rows from the CSV; raises SchemaError on any shape problem."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise SchemaError("CSV is empty")
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    rows = list(reader)
    if not rows:
        raise SchemaError("CSV has a header but no rows")
    cells = []
    for row in rows:
        if row["seed"] != "aggregate":
            continue
        values = {}
        for col in ("created", "delivered", "forwardings", "delivery_rate",
                    "cost", "mean_delay_s", "ci_delivery", "ci_cost",
                    "ci_delay"):
            values[col] = _parse_float(row[col])
        cells.append(Cell(protocol=row["protocol"],
                          ttl_hours=float(row["ttl_hours"]), values=values))
    if not cells:
        raise SchemaError("no aggregate rows found; per-run rows alone "
                          "cannot be plotted (rerun the report writer)")
    return cells


def render_panel(cells: list[Cell], panel: str):
    """Build one panel figure: grouped bars over TTL, one group per protocol."""
    if panel not in PANELS:
        raise SchemaError(f"unknown panel '{panel}' (valid: a-f)")
    metric, ci_col, label = PANELS[panel]
    protocols = sorted({c.protocol for c in cells})
    ttls = sorted({c.ttl_hours for c in cells})
    by_key = {(c.protocol, c.ttl_hours): c for c in cells}

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    width = 0.8 / max(len(protocols), 1)
    for pi, protocol in enumerate(protocols):
        xs, ys, errs = [], [], []
        for ti, ttl in enumerate(ttls):
            cell = by_key.get((protocol, ttl))
            value = cell.values.get(metric) if cell else None
            if value is None:
                continue  # absent metric: leave a gap
            xs.append(ti + pi * width)
            ys.append(value)
            if ci_col is not None:
                half = cell.values.get(ci_col)
                errs.append(half if half is not None else 0.0)
        yerr = errs if (ci_col is not None and xs) else None
        ax.bar(xs, ys, width=width * 0.95, label=protocol,
               yerr=yerr, capsize=3 if yerr is not None else 0)
    ax.set_xticks([t + width * (len(protocols) - 1) / 2
                   for t in range(len(ttls))])
    ax.set_xticklabels([f"{t:g}" for t in ttls])
    ax.set_xlabel("TTL (hours)")
    ax.set_ylabel(label)
    ax.set_title(f"({panel}) {label}")
    ax.legend()
    fig.tight_layout()
    return fig


def render(csv_path, out_dir, panels: str = "a,b,c,d,e,f") -> dict[str, Path]:
    """Write one PNG per requested panel; returns panel -> file path."""
    text = Path(csv_path).read_text(encoding="utf-8")
    cells = load_aggregates(text)
    wanted = [p.strip() for p in panels.split(",") if p.strip()]
    for p in wanted:
        if p not in PANELS:
            raise SchemaError(f"unknown panel '{p}' (valid: a-f)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for p in wanted:
        fig = render_panel(cells, p)
        path = out / f"panel_{p}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written[p] = path
    return written
