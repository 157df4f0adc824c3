"""CSV-to-figure rendering for the experiment harness outputs."""

from .render import PlotSpec, SchemaError, render

__all__ = ["PlotSpec", "SchemaError", "render"]
