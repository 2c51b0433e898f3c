"""oppsim-plots: figure panels for opportunistic-routing benchmark CSVs."""

from .render import PANELS, SchemaError, load_aggregates, render, render_panel

__all__ = ["PANELS", "SchemaError", "load_aggregates", "render", "render_panel"]

__version__ = "0.1.0"
