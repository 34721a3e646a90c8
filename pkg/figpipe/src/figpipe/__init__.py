"""Figure rendering for sweep CSV files."""

from .render import EXPECTED_HEADER, KINDS, FigureSpec, SchemaError, read_sweep_csv, render_figure

__version__ = "0.1.0"
