"""Charts over the treecolour CLI's CSV outputs."""
from .render import PlotSpec, SchemaError, render

__all__ = ["PlotSpec", "SchemaError", "render"]
