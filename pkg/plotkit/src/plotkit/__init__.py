"""Render paper-style figures from afdmtk CSV artifacts.

Pure presentation layer: every number comes from the input CSVs, nothing is
recomputed here. Each figure family is also exposed as a console script that
takes (csv_dir, out_dir).
"""

from .families import (
    FAMILIES,
    FigureSpec,
    SchemaError,
    render,
    render_all,
    render_family,
)

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "FigureSpec",
    "SchemaError",
    "render",
    "render_all",
    "render_family",
]
